"""Execute scenarios (simulate, scan, sweep) and persist their artifacts."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .analysis import convergence_report
from .errors import CatalogError
from .scenario import Scenario
from .sim import COMPLETED, Unicycle, integrate, integrate_batch
from .singular import singular_scan

REPRODUCTIONS = {
    "trefoil": "trefoil.json",
    "lissajous3d": "lissajous3d.json",
    "circle-impossibility": "circle-impossibility.json",
    "figure8-scan": "figure8-singularities.json",
}

UNITS = {"length": "m", "angle": "rad", "time": "s", "phi": "m (scaled by L)"}


@dataclass
class RunResult:
    report: dict
    trajectory: object = None
    field: object = None
    files: list[str] = dc_field(default_factory=list)


def bundled_scenario(name: str) -> Scenario:
    try:
        fname = REPRODUCTIONS[name]
    except KeyError:
        raise CatalogError(f"unknown reproduction {name!r}; expected one of {', '.join(REPRODUCTIONS)}") from None
    return Scenario.load(resources.files("gvfpath") / "scenarios" / fname)


def bundled_paths() -> list[Path]:
    root = resources.files("gvfpath") / "scenarios"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".json"))


# --------------------------------------------------------------------------
# modes
# --------------------------------------------------------------------------

def simulate(scn: Scenario) -> RunResult:
    dyn = scn.build_dynamics()
    x0 = scn.initial_state(dynamics=dyn)
    sim = scn.sim
    traj = integrate(dyn, x0, dt=float(sim["dt"]), T=float(sim["T"]), method=sim["method"],
                     record_every=int(sim["record_every"]))
    conv = convergence_report(traj, dyn.field)
    report = {
        "name": scn.name,
        "mode": "simulate",
        "model": scn.model,
        "termination": traj.termination,
        "message": traj.message,
        "records": len(traj),
        "t_final": float(traj.t[-1]),
        "convergence": conv.to_dict(),
        "units": UNITS,
    }
    if isinstance(dyn, Unicycle):
        beta = np.asarray(traj.beta, dtype=float)
        report["heading_error_initial"] = float(beta[0])
        report["heading_error_final"] = float(beta[-1])
    return RunResult(report, traj, dyn.field)


def scan(scn: Scenario) -> RunResult:
    fld = scn.build_field()
    sec = scn.doc["scan"]
    grid = int(sec.get("grid", 33))
    pts = singular_scan(fld, sec["lower"], sec["upper"], grid)
    report = {
        "name": scn.name,
        "mode": "scan",
        "box": {"lower": sec["lower"], "upper": sec["upper"]},
        "grid": grid,
        "count": len(pts),
        "singular_points": [list(p) for p in pts],
    }
    return RunResult(report, None, fld)


def sweep_starts(scn: Scenario) -> np.ndarray:
    sec = scn.doc["sweep"]
    include = [list(map(float, p)) for p in sec.get("include", [])]
    rng = np.random.default_rng(int(scn.doc["seed"]))
    lo, hi = np.asarray(sec["lower"], dtype=float), np.asarray(sec["upper"], dtype=float)
    rand = lo + (hi - lo) * rng.random((int(sec.get("count", 100)), lo.size))
    return np.vstack([np.asarray(include).reshape(-1, lo.size), rand]) if include else rand


def _summary(index, start, traj, dt, tol):
    xi = np.asarray(traj.xi, dtype=float)
    V = np.asarray(traj.V, dtype=float)
    dV = np.diff(V)
    final = float(traj.err_norm[-1])
    return {
        "index": index,
        "start": [float(v) for v in start],
        "termination": traj.termination,
        "final_error": final,
        "converged": bool(traj.termination == COMPLETED and final <= tol),
        "stationary": bool(np.max(np.linalg.norm(xi - xi[0], axis=-1)) <= 1e-12),
        "V_nonincreasing": bool(dV.size == 0 or dV.max() <= 1e-9 * dt),
    }


def sweep(scn: Scenario, workers: int | None = None) -> RunResult:
    sim = scn.sim
    dt, T, method = float(sim["dt"]), float(sim["T"]), sim["method"]
    tol = float(scn.doc["sweep"].get("converge_tol", 1e-2))
    dyn = scn.build_dynamics()
    starts = sweep_starts(scn)
    x0 = np.stack([scn.initial_state(p, dyn) for p in starts])
    if getattr(dyn, "batchable", False):
        trajs = integrate_batch(dyn, x0, dt=dt, T=T, method=method)
    else:
        def one(x):
            # fresh dynamics per worker; runs share nothing mutable
            return integrate(scn.build_dynamics(), x, dt=dt, T=T, method=method)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(one, x0))
    runs = [_summary(i, s, tj, dt, tol) for i, (s, tj) in enumerate(zip(starts, trajs))]
    n_inc = len(scn.doc["sweep"].get("include", []))
    rand = runs[n_inc:]
    report = {
        "name": scn.name,
        "mode": "sweep",
        "model": scn.model,
        "seed": int(scn.doc["seed"]),
        "count": len(runs),
        "converge_tol": tol,
        "random_converged": sum(r["converged"] for r in rand),
        "random_total": len(rand),
        "all_random_converged": all(r["converged"] for r in rand),
        "runs": runs,
    }
    return RunResult(report, None, dyn.field)


def execute(scn: Scenario, workers: int | None = None) -> RunResult:
    if scn.mode == "scan":
        return scan(scn)
    if scn.mode == "sweep":
        return sweep(scn, workers)
    return simulate(scn)


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------

def _reference_curve(fld, traj):
    path = getattr(fld, "guiding_path", None)
    if path is None:
        return None
    if path.period is not None:
        w = np.linspace(0.0, path.period, 2000)
    else:
        xi = np.asarray(traj.xi, dtype=float)
        w = np.linspace(xi[:, -1].min(), xi[:, -1].max(), 2000)
    return path.f(w)


def plots(result: RunResult) -> dict[str, str]:
    traj, fld = result.trajectory, result.field
    xi = np.asarray(traj.xi, dtype=float)
    t = np.asarray(traj.t, dtype=float)
    ref = _reference_curve(fld, traj)
    out = {}
    xy = [(xi[:, 0], xi[:, 1], "trajectory")]
    if ref is not None:
        xy.insert(0, (ref[:, 0], ref[:, 1], "desired path"))
    out["xy.svg"] = io.svg_plot(xy, title="planar trajectory", xlabel="x [m]", ylabel="y [m]", equal=True)
    if fld.n_physical >= 3:
        u, v = io.project_3d(xi[:, :3])
        series = [(u, v, "trajectory")]
        if ref is not None:
            ru, rv = io.project_3d(ref)
            series.insert(0, (ru, rv, "desired path"))
        out["xyz.svg"] = io.svg_plot(series, title="3D view (orthographic)", xlabel="u", ylabel="v", equal=True)
    err = np.asarray(traj.err_norm, dtype=float)
    logerr = np.log10(np.maximum(err, 1e-300))
    out["error.svg"] = io.svg_plot([(t, logerr, "log10 |e|")], title="path-following error",
                                   xlabel="t [s]", ylabel="log10 |e|")
    if fld.has_virtual:
        out["w.svg"] = io.svg_plot([(t, xi[:, -1], "w")], title="virtual coordinate",
                                   xlabel="t [s]", ylabel="w")
    if "beta" in traj.records:
        out["beta.svg"] = io.svg_plot([(t, traj.beta, "beta")], title="heading error",
                                      xlabel="t [s]", ylabel="beta [rad]")
    return out


def write_artifacts(scn: Scenario, result: RunResult, out_dir) -> list[str]:
    """Write everything for ``result`` under ``out_dir``; OSError propagates."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if result.trajectory is not None:
        if scn.outputs.get("csv", True):
            io.write_trajectory(result.trajectory, result.field, out / "trajectory.csv")
            files.append("trajectory.csv")
        if scn.outputs.get("svg", True):
            for name, text in plots(result).items():
                io.write_text(text, out / name)
                files.append(name)
    io.write_text(scn.to_json(), out / "scenario.json")
    files.append("scenario.json")
    result.report["files"] = sorted(files + ["report.json"])
    io.write_json(result.report, out / "report.json")
    result.files = result.report["files"]
    return result.files


def settled_ok(report: dict, threshold: float) -> bool:
    val = report.get("convergence", {}).get("settled_position_error_max")
    return val is not None and math.isfinite(val) and val <= threshold
