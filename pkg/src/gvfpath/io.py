"""Deterministic writers: trajectory CSV, JSON reports and SVG line plots."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np


def fmt(v) -> str:
    """17 significant digits; blank for missing or NaN values."""
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def trajectory_columns(traj, field) -> tuple[list[str], list[list]]:
    """Header and column arrays for ``trajectory.csv``."""
    xi = np.asarray(traj.xi, dtype=float)
    count = len(traj.t)
    blank = [None] * count
    npos = field.n_physical
    cols: list[tuple[str, Sequence]] = [("t", traj.t)]
    for j, name in enumerate("xyz"):
        cols.append((name, xi[:, j] if j < min(npos, 3) else blank))
    cols.append(("w", xi[:, -1] if field.has_virtual else blank))
    records = traj.records
    cols.append(("theta", records["theta"] if "theta" in records else blank))
    e = np.asarray(traj.e, dtype=float).reshape(count, -1)
    cols += [(f"phi_{i + 1}", e[:, i]) for i in range(e.shape[1])]
    cols.append(("err_norm", traj.err_norm))
    cols.append(("V", traj.V))
    cols.append(("beta", records["beta"] if "beta" in records else blank))
    chi = np.asarray(traj.chi, dtype=float)
    cols += [(f"chi_{i + 1}", chi[:, i]) for i in range(chi.shape[1])]
    if "xt" in records:
        xt = np.asarray(records["xt"], dtype=float)
        cols += [(f"xt_{i + 1}", xt[:, i]) for i in range(xt.shape[1])]
    return [c[0] for c in cols], [c[1] for c in cols]


def trajectory_csv(traj, field) -> str:
    header, columns = trajectory_columns(traj, field)
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_trajectory(traj, field, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trajectory_csv(traj, field))
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def report_json(report: dict) -> str:
    return json.dumps(_clean(report), indent=2) + "\n"


def write_json(report: dict, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_json(report))
    return path


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

PALETTE = ("#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad")


def _decimate(x, y, limit: int = 2000):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if len(x) > limit:
        idx = np.unique(np.linspace(0, len(x) - 1, limit).astype(int))
        x, y = x[idx], y[idx]
    return x, y


def _ticks(lo, hi, count=5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, count))


def svg_plot(series, *, title: str, xlabel: str, ylabel: str, width: int = 640,
             height: int = 420, equal: bool = False) -> str:
    """Polyline chart.  ``series`` is a list of ``(x, y, label)`` tuples."""
    data = [(*_decimate(x, y), label) for x, y, label in series]
    data = [d for d in data if len(d[0])]
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    if data:
        xs = np.concatenate([d[0] for d in data])
        ys = np.concatenate([d[1] for d in data])
        x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx, sy = pw / (x1 - x0), ph / (y1 - y0)
    if equal:
        sx = sy = min(sx, sy)

    def px(v):
        return ml + (v - x0) * sx

    def py(v):
        return mt + ph - (v - y0) * sy

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
    ]
    for v in _ticks(x0, x1):
        out.append(f'<text x="{px(v):.1f}" y="{mt + ph + 16}" text-anchor="middle">{v:.4g}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<text x="{ml - 6}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{ylabel}</text>')
    for i, (x, y, label) in enumerate(data):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 14 + 14 * i}" fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def project_3d(points, azimuth: float = math.radians(-50), elevation: float = math.radians(25)):
    """Orthographic view of 3D points; returns screen ``(u, v)``."""
    P = np.asarray(points, dtype=float)
    ca, sa = math.cos(azimuth), math.sin(azimuth)
    ce, se = math.cos(elevation), math.sin(elevation)
    u = ca * P[:, 0] - sa * P[:, 1]
    v = se * (sa * P[:, 0] + ca * P[:, 1]) + ce * P[:, 2]
    return u, v


def write_text(text: str, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
