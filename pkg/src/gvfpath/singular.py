"""Search for singular points (zeros) of a vector field inside a box."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError

ACCEPT_NORM = 1e-10
DEDUPE_TOL = 1e-6
MAX_SEEDS = 200


def _local_minima(values: np.ndarray) -> np.ndarray:
    """Flat indices of grid cells no larger than any axis neighbour."""
    pad = np.pad(values, 1, constant_values=np.inf)
    core = tuple(slice(1, -1) for _ in range(values.ndim))
    mask = np.ones(values.shape, dtype=bool)
    for ax in range(values.ndim):
        for shift in (-1, 1):
            sl = list(core)
            sl[ax] = slice(1 + shift, pad.shape[ax] - 1 + shift)
            mask &= values <= pad[tuple(sl)]
    return np.flatnonzero(mask)


def _fd_jacobian(field, X: np.ndarray) -> np.ndarray:
    m = X.shape[-1]
    h = 1e-6 * np.maximum(1.0, np.abs(X))  # (P, m)
    steps = np.eye(m)[None, :, :] * h[:, :, None]  # (P, m, m): row j perturbs x_j
    up = field(X[:, None, :] + steps)
    dn = field(X[:, None, :] - steps)
    # (P, m, m) with [p, j, i] = d chi_i / d x_j -> transpose to [p, i, j]
    return np.swapaxes((up - dn) / (2 * h[:, :, None]), -1, -2)


def _newton(field, X: np.ndarray, iters: int = 60) -> np.ndarray:
    X = X.copy()
    F = field(X)
    nrm = np.linalg.norm(F, axis=-1)
    for _ in range(iters):
        active = nrm > 1e-14
        if not active.any():
            break
        Xa, Fa, na = X[active], F[active], nrm[active]
        step = -np.einsum("pij,pj->pi", np.linalg.pinv(_fd_jacobian(field, Xa)), Fa)
        alpha = np.ones(len(Xa))
        newX, newF, newn = Xa.copy(), Fa.copy(), na.copy()
        pending = np.ones(len(Xa), dtype=bool)
        for _ in range(30):
            trial = Xa[pending] + alpha[pending, None] * step[pending]
            Ft = field(trial)
            nt = np.linalg.norm(Ft, axis=-1)
            ok = nt < na[pending]
            idx = np.flatnonzero(pending)[ok]
            newX[idx], newF[idx], newn[idx] = trial[ok], Ft[ok], nt[ok]
            pending[idx] = False
            alpha[pending] *= 0.5
            if not pending.any():
                break
        if np.array_equal(newn, na):
            break
        X[active], F[active], nrm[active] = newX, newF, newn
    return X


def singular_scan(field: Callable[[np.ndarray], np.ndarray], lower: Sequence[float],
                  upper: Sequence[float], grid: int = 33) -> list[tuple[float, ...]]:
    """Singular points of ``field`` inside the box ``[lower, upper]``.

    Grid minima of ``|chi|`` seed a damped Newton iteration that uses a
    finite-difference Jacobian, so any batched callable works.  Points with
    ``|chi| <= 1e-10`` inside the box are returned, deduplicated and sorted.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1 or not np.all(hi > lo):
        raise ParameterError("scan box needs lower < upper on every axis")
    if int(grid) < 8:
        raise ParameterError("scan grid needs at least 8 points per axis")
    axes = [np.linspace(a, b, int(grid)) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    norms = np.linalg.norm(field(mesh), axis=-1)
    flat = norms.ravel()
    minima = _local_minima(norms)
    minima = minima[np.argsort(flat[minima], kind="stable")]
    # coarse grids can hide a basin between cells; top up with the lowest cells
    lowest = np.argsort(flat, kind="stable")[:MAX_SEEDS]
    seeds_idx = list(dict.fromkeys([*minima.tolist(), *lowest.tolist()]))[:MAX_SEEDS]
    seeds = mesh.reshape(-1, lo.size)[seeds_idx]
    if not len(seeds):
        return []

    roots = _newton(field, seeds)
    final = np.linalg.norm(field(roots), axis=-1)
    span = hi - lo
    inside = np.all((roots >= lo - 1e-9 * span) & (roots <= hi + 1e-9 * span), axis=-1)
    keep = roots[(final <= ACCEPT_NORM) & inside]

    found: list[np.ndarray] = []
    for p in keep:
        if all(np.linalg.norm(p - q) > DEDUPE_TOL for q in found):
            found.append(p)
    snap = 1e-12 * float(np.max(span))
    pts = [tuple(0.0 if abs(v) < snap else float(v) for v in p) for p in found]
    return sorted(pts)
