"""Convergence metrics, Lyapunov checks and assumption diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InsufficientDataError, ParameterError, ShapeError
from .paths import ParametricPath, SurfaceStack


# --------------------------------------------------------------------------
# Lyapunov function
# --------------------------------------------------------------------------

def lyapunov(e, K, N=None):
    """``V = e^T K e / 2`` and, given ``N``, its derivative ``-|N K e|^2``.

    ``K`` may be a gain vector (the diagonal) or a full matrix.  Batches of
    ``e`` (``(..., m-1)``) and ``N`` (``(..., m, m-1)``) are supported.  The
    derivative is ``None`` when ``N`` is omitted.
    """
    e = np.asarray(e, dtype=float)
    K = np.asarray(K, dtype=float)
    Ke = K * e if K.ndim <= 1 else np.einsum("ij,...j->...i", K, e)
    V = 0.5 * np.sum(e * Ke, axis=-1)
    if N is None:
        return V, None
    N = np.asarray(N, dtype=float)
    if N.shape[-1] != e.shape[-1]:
        raise ShapeError("N must have one column per error component")
    NKe = np.einsum("...ij,...j->...i", N, Ke)
    return V, -np.sum(NKe * NKe, axis=-1)


def gram_determinant(N) -> np.ndarray:
    """``det(N^T N)``; equals the squared norm of the cross product of N's columns."""
    N = np.asarray(N, dtype=float)
    return np.linalg.det(np.swapaxes(N, -1, -2) @ N)


# --------------------------------------------------------------------------
# distance to a parametric path
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceResult:
    distance: float
    w: float
    # worst-case overestimate of the coarse sampled minimum
    sampling_bound: float


def _w_grid(path: ParametricPath, w_range, samples: int) -> np.ndarray:
    if w_range is None:
        if path.period is None:
            raise ParameterError(f"path {path.name!r} is open; give a parameter range")
        w_range = (0.0, path.period)
    lo, hi = (float(v) for v in w_range)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ParameterError("parameter range must be finite with lo < hi")
    if samples < 64:
        raise ParameterError("distance sampling needs at least 64 samples")
    return np.linspace(lo, hi, int(samples))


def coarse_distance(points, path: ParametricPath, w_range=None, samples: int = 512,
                    chunk: int = 2048):
    """Sampled distance from each point to the path (vectorized, no refinement).

    Returns ``(distance, w_best, bound)`` where ``bound`` caps the
    overestimate: half a sample spacing times the largest sampled speed.
    """
    W = _w_grid(path, w_range, samples)
    F, F1, _ = path.evaluate(W)
    bound = 0.5 * float(W[1] - W[0]) * float(np.max(np.linalg.norm(F1, axis=-1)))
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[-1] != path.n:
        raise ShapeError(f"points have dimension {P.shape[-1]}, path has {path.n}")
    flat = P.reshape(-1, path.n)
    dist = np.empty(len(flat))
    wbest = np.empty(len(flat))
    for a in range(0, len(flat), chunk):
        d = np.linalg.norm(flat[a:a + chunk, None, :] - F[None], axis=-1)
        j = np.argmin(d, axis=-1)
        dist[a:a + chunk] = d[np.arange(len(j)), j]
        wbest[a:a + chunk] = W[j]
    shape = P.shape[:-1]
    return dist.reshape(shape), wbest.reshape(shape), bound


def distance_detail(point, path: ParametricPath, w_range=None, samples: int = 512,
                    candidates: int = 3) -> DistanceResult:
    """Distance by dense sampling plus bounded scalar refinement of the best samples."""
    p = np.asarray(point, dtype=float)
    if p.shape != (path.n,):
        raise ShapeError(f"point must have shape ({path.n},)")
    W = _w_grid(path, w_range, samples)
    F, F1, _ = path.evaluate(W)
    d = np.linalg.norm(F - p, axis=-1)
    bound = 0.5 * float(W[1] - W[0]) * float(np.max(np.linalg.norm(F1, axis=-1)))
    best_d, best_w = float(d.min()), float(W[np.argmin(d)])

    def dist(w):
        return float(np.linalg.norm(path.evaluate(w)[0] - p))

    for j in np.argsort(d, kind="stable")[:candidates]:
        lo, hi = W[max(j - 1, 0)], W[min(j + 1, len(W) - 1)]
        res = minimize_scalar(dist, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        w, dw = float(res.x), float(res.fun)
        # polish: Newton on (f(w) - p) . f'(w) = 0
        for _ in range(3):
            f0, f1, f2 = path.evaluate(w)
            r = f0 - p
            curv = float(f1 @ f1 + r @ f2)
            if curv <= 0:
                break
            w_new = min(max(w - float(r @ f1) / curv, lo), hi)
            d_new = dist(w_new)
            if d_new > dw:
                break
            w, dw = w_new, d_new
        if dw < best_d:
            best_d, best_w = dw, w
    return DistanceResult(best_d, best_w, bound)


def distance_to_path(point, path: ParametricPath, w_range=None, samples: int = 512) -> float:
    """Euclidean distance from ``point`` to the image of ``path`` over ``w_range``.

    Closed catalog paths default to one full period.
    """
    return distance_detail(point, path, w_range, samples).distance


# --------------------------------------------------------------------------
# rate fitting
# --------------------------------------------------------------------------

def fit_exponential_rate(t, err, burn_in: float = 0.2, floor: float = 0.0):
    """Least-squares fit of ``log |e|`` against time after a burn-in fraction.

    Returns ``(lam, r2)`` with ``lam = -slope``.  Non-positive (and, when
    ``floor`` is given, sub-floor) samples are dropped.
    """
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    if t.shape != err.shape or t.ndim != 1:
        raise ShapeError("time and error series must be 1-D and equally long")
    if not 0.0 <= burn_in < 1.0:
        raise ParameterError("burn_in must lie in [0, 1)")
    if len(t) == 0:
        raise InsufficientDataError("empty series")
    start = t[0] + burn_in * (t[-1] - t[0])
    keep = (t >= start) & np.isfinite(err) & (err > floor) & (err > 0)
    if keep.sum() < 10:
        raise InsufficientDataError(f"need at least 10 usable samples, got {int(keep.sum())}")
    x, y = t[keep], np.log(err[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot <= 1e-30 * len(y):
        r2 = 1.0
    else:
        r2 = max(0.0, 1.0 - ss_res / ss_tot)
    lam = -float(slope)
    # an exactly constant series gives a tiny round-off slope
    if ss_tot <= 1e-30 * len(y):
        lam = 0.0
    return lam + 0.0, r2


# --------------------------------------------------------------------------
# assumption diagnostics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeRow:
    kappa: float
    estimate: float
    count: int
    flagged: bool


def assumption2_diagnostic(stack: SurfaceStack, path: ParametricPath, lower, upper, kappas,
                           samples: int = 200_000, seed: int = 0, w_range=None,
                           path_samples: int = 1024) -> list[EnvelopeRow]:
    """Monte-Carlo estimate of ``inf |e(xi)|`` over ``dist(xi, P) >= kappa`` in a box.

    ``path`` lives in the same space as ``stack``.  Rows with an estimate at
    or below ``1e-9`` are flagged; rows with no qualifying sample report
    ``inf`` and are not flagged.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if lo.shape != (stack.m,) or hi.shape != lo.shape or not np.all(hi > lo):
        raise ParameterError("box must be a nondegenerate region of the stack's space")
    rng = np.random.default_rng(seed)
    X = lo + (hi - lo) * rng.random((int(samples), stack.m))
    err = np.linalg.norm(np.atleast_2d(stack.phi(X)).reshape(len(X), -1), axis=-1)
    dist, _, _ = coarse_distance(X, path, w_range, path_samples)
    rows = []
    for kappa in kappas:
        kappa = float(kappa)
        if not kappa > 0:
            raise ParameterError("kappa must be > 0")
        sel = dist >= kappa
        est = float(err[sel].min()) if sel.any() else math.inf
        rows.append(EnvelopeRow(kappa, est, int(sel.sum()), est <= 1e-9))
    return rows


def q_min_sampled(field, points) -> float:
    """Smallest eigenvalue of ``K N^T N K`` over sampled points."""
    s = field.sample(np.asarray(points, dtype=float))
    K = np.diag(np.broadcast_to(field.params.K, s.e.shape[-1:]))
    Q = K @ np.swapaxes(s.N, -1, -2) @ s.N @ K
    return float(np.min(np.linalg.eigvalsh(Q)))


# --------------------------------------------------------------------------
# guiding point
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GuidingTrace:
    points: np.ndarray
    w: np.ndarray
    w_dot_sign: np.ndarray
    reversed: bool


def guiding_point_trace(traj, field) -> GuidingTrace:
    """Guiding points ``f(g(w(t)))`` and the sign of the virtual speed.

    The sign is taken from the last field component, which fixes the
    direction of ``w_dot`` for every model in this package.
    """
    xi = np.asarray(traj.xi, dtype=float)
    w = xi[:, -1]
    sign = np.sign(np.asarray(traj.chi, dtype=float)[:, -1]).astype(int)
    nz = sign[sign != 0]
    return GuidingTrace(field.guiding_point(w), w, sign, bool(np.any(nz != nz[0])) if nz.size else False)


# --------------------------------------------------------------------------
# curve comparison
# --------------------------------------------------------------------------

def resample_by_arclength(points, count: int = 200) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(P, axis=0), axis=-1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return np.repeat(P[:1], count, axis=0)
    target = np.linspace(0.0, s[-1], count)
    return np.stack([np.interp(target, s, P[:, j]) for j in range(P.shape[1])], axis=-1)


def matched_arclength_distance(a, b, length: float | None = None, count: int = 200) -> float:
    """Max pointwise gap between two polylines resampled at equal arc length.

    With ``length`` given, both curves are cut at that arc length first.
    This bounds the discrete Frechet distance from above.
    """
    A, B = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if length is not None:
        A, B = _cut(A, length), _cut(B, length)
    ra, rb = resample_by_arclength(A, count), resample_by_arclength(B, count)
    return float(np.max(np.linalg.norm(ra - rb, axis=-1)))


def _cut(P, length):
    seg = np.linalg.norm(np.diff(P, axis=0), axis=-1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if length >= s[-1]:
        return P
    j = int(np.searchsorted(s, length))
    frac = (length - s[j - 1]) / (s[j] - s[j - 1])
    end = P[j - 1] + frac * (P[j] - P[j - 1])
    return np.vstack([P[:j], end])


# --------------------------------------------------------------------------
# convergence report
# --------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    lam: float | None
    r2: float | None
    ultimate_bound: float
    final_error: float
    termination: str
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "lambda": self.lam,
            "r2": self.r2,
            "ultimate_bound": self.ultimate_bound,
            "final_error": self.final_error,
            "termination": self.termination,
        }
        out.update(self.extras)
        return out


def convergence_report(traj, field=None, *, burn_in: float = 0.2, r2_threshold: float = 0.99,
                       fit_floor: float = 1e-12, distance_points: int = 200) -> ConvergenceReport:
    """Summarize a trajectory.  ``lambda`` is ``None`` unless the fit reaches ``r2_threshold``."""
    t = np.asarray(traj.t, dtype=float)
    err = np.asarray(traj.err_norm, dtype=float)
    start = t[0] + burn_in * (t[-1] - t[0])
    settled = err[t >= start]
    try:
        lam, r2 = fit_exponential_rate(t, err, burn_in, floor=fit_floor)
    except InsufficientDataError:
        lam, r2 = None, None
    extras: dict = {}
    if field is not None and getattr(field, "has_virtual", False):
        e = np.asarray(traj.e, dtype=float)[t >= start]
        extras["settled_phi_max"] = [float(v) for v in np.max(np.abs(e), axis=0)]
        extras["settled_position_error_max"] = float(np.max(np.abs(e))) / field.L
        extras["w_reversal"] = guiding_point_trace(traj, field).reversed
        path = field.guiding_path
        if path.period is not None:
            xi = np.asarray(traj.xi, dtype=float)
            idx = np.unique(np.linspace(0, len(xi) - 1, min(distance_points, len(xi))).astype(int))
            dist, _, bound = coarse_distance(xi[idx, :field.n_physical], path, None, 4096)
            extras["distance_max_sampled"] = float(dist.max())
            extras["distance_sampling_bound"] = bound
            extras["distance_final"] = distance_detail(xi[-1, :field.n_physical], path, None, 4096).distance
        extras["q_min_sampled"] = q_min_sampled(field, np.asarray(traj.xi, dtype=float))
    return ConvergenceReport(
        lam=lam if (r2 is not None and r2 >= r2_threshold) else None,
        r2=r2,
        ultimate_bound=float(settled.max()) if settled.size else float("nan"),
        final_error=float(err[-1]),
        termination=traj.termination,
        extras=extras,
    )
