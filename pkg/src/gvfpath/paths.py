"""Parametric desired paths and their implicit surface descriptions.

A path is a map ``w -> R^n`` supplied together with its first and second
derivatives.  Every evaluation function is vectorized: ``w`` may be any
array and the result carries a trailing axis of length ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import CatalogError, DomainError, ParameterError, ShapeError, ValidationError

Triple = tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class ParametricPath:
    """Desired path ``w -> (f(w), f'(w), f''(w))`` in ``R^n``."""

    n: int
    evaluate: Callable[[np.ndarray], Triple] = field(repr=False)
    name: str = "path"
    # smallest positive parameter period, None for open curves
    period: float | None = None

    def f(self, w):
        return self.evaluate(w)[0]

    def f1(self, w):
        return self.evaluate(w)[1]

    def f2(self, w):
        return self.evaluate(w)[2]

    def __call__(self, w):
        return self.evaluate(w)[0]


@dataclass(frozen=True)
class AffinePose:
    """Planar rotation of the first two coordinates followed by a translation."""

    rotation: float = 0.0
    offset: tuple[float, ...] = (0.0, 0.0, 0.0)

    def matrix(self, n: int) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        R = np.eye(n)
        R[:2, :2] = [[c, -s], [s, c]]
        return R


@dataclass(frozen=True)
class Reparameterization:
    """Linear re-parameterization ``g(w) = param_gain * w``."""

    beta: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"reparameterization gain must be > 0, got {self.beta}")

    @property
    def param_gain(self) -> float:
        """Alias that keeps the gain distinct from the heading error angle."""
        return self.beta


@dataclass(frozen=True)
class SurfaceStack:
    """Implicit description of a path as the zero set of ``m - 1`` functions.

    ``phi`` maps ``(..., m)`` to the stacked error ``(..., m-1)``; ``grad``
    returns the gradient matrix ``N`` with shape ``(..., m, m-1)`` (one
    gradient per column); ``hessians``, when present, returns
    ``(..., m-1, m, m)``.
    """

    m: int
    phi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    grad: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    hessians: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    name: str = "stack"

    @property
    def count(self) -> int:
        return self.m - 1


def eval_path(path: ParametricPath, w) -> Triple:
    """Return ``f(w), f'(w), f''(w)``; raises DomainError for non-finite ``w``."""
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("path parameter must be finite")
    return path.evaluate(w)


def apply_affine(path: ParametricPath, pose: AffinePose) -> ParametricPath:
    """Rotate and translate a path.

    Derivatives are rotated only.  A planar path given a three-component
    offset is lifted to ``R^3`` with ``f_3 = z_o``.
    """
    if path.n not in (2, 3):
        raise ShapeError(f"affine placement needs a 2D or 3D path, got n={path.n}")
    offset = np.asarray(pose.offset, dtype=float)
    n_out = offset.size
    if n_out not in (path.n, 3) or n_out < path.n:
        raise ShapeError(f"offset of length {n_out} does not fit a path with n={path.n}")
    R = pose.matrix(path.n)
    base = path.evaluate
    lift = n_out - path.n

    def evaluate(w):
        p, d1, d2 = base(w)
        p, d1, d2 = p @ R.T, d1 @ R.T, d2 @ R.T
        if lift:
            pad = [(0, 0)] * (p.ndim - 1) + [(0, lift)]
            p, d1, d2 = np.pad(p, pad), np.pad(d1, pad), np.pad(d2, pad)
        return p + offset, d1, d2

    return ParametricPath(n_out, evaluate, name=path.name, period=path.period)


def reparameterize(path: ParametricPath, rep: Reparameterization) -> ParametricPath:
    """Return ``h(w) = f(beta w)`` with chain-rule derivatives."""
    if not rep.beta > 0:
        raise ParameterError("reparameterization gain must be > 0")
    b = float(rep.beta)
    base = path.evaluate

    def evaluate(w):
        p, d1, d2 = base(b * np.asarray(w, dtype=float))
        return p, b * d1, (b * b) * d2

    period = path.period / b if path.period is not None else None
    return ParametricPath(path.n, evaluate, name=path.name, period=period)


def lifted_path(path: ParametricPath, rep: Reparameterization | None = None) -> ParametricPath:
    """The unbounded curve ``w -> (f(g(w)), w)`` in ``R^{n+1}``."""
    h = reparameterize(path, rep) if rep is not None else path

    def evaluate(w):
        w = np.asarray(w, dtype=float)
        p, d1, d2 = h.evaluate(w)
        one = np.ones(w.shape + (1,))
        return (np.concatenate([p, w[..., None]], axis=-1),
                np.concatenate([d1, one], axis=-1),
                np.concatenate([d2, 0.0 * one], axis=-1))

    return ParametricPath(path.n + 1, evaluate, name=f"lifted-{path.name}")


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------

TREFOIL_DEFAULTS = {"a": 80.0, "b": 160.0, "omega1": 0.02, "omega2": 0.03}
LISSAJOUS_DEFAULTS = {
    "cx": 225.0, "cy": 225.0, "cz": -20.0,
    "wx": 1.0, "wy": 2.0, "wz": 2.0,
    "dx": 0.0, "dy": math.pi / 2, "dz": 0.0,
}


def common_period(freqs) -> float | None:
    """Smallest ``T > 0`` with ``freq * T`` a multiple of ``2 pi`` for every frequency."""
    fr = [Fraction(abs(float(v))).limit_denominator(10**6) for v in freqs if v != 0]
    if not fr:
        return None
    num = reduce(math.gcd, (f.numerator for f in fr))
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fr))
    return 2 * math.pi * den / num


def _circle(p):
    r, om = float(p["r"]), float(p.get("omega", 1.0))
    cx, cy = (float(v) for v in p.get("center", (0.0, 0.0)))
    if r <= 0:
        raise ParameterError("circle radius must be > 0")

    def evaluate(w):
        s = om * np.asarray(w, dtype=float)
        c, sn = np.cos(s), np.sin(s)
        return (np.stack([cx + r * c, cy + r * sn], axis=-1),
                np.stack([-r * om * sn, r * om * c], axis=-1),
                np.stack([-r * om**2 * c, -r * om**2 * sn], axis=-1))

    return ParametricPath(2, evaluate, name="circle", period=common_period([om]))


def _ellipse(p):
    a, b = float(p["a"]), float(p["b"])
    if a <= 0 or b <= 0:
        raise ParameterError("ellipse semi-axes must be > 0")

    def evaluate(w):
        w = np.asarray(w, dtype=float)
        c, s = np.cos(w), np.sin(w)
        return (np.stack([a * c, b * s], axis=-1),
                np.stack([-a * s, b * c], axis=-1),
                np.stack([-a * c, -b * s], axis=-1))

    return ParametricPath(2, evaluate, name="ellipse", period=2 * math.pi)


def _line(p):
    p0 = np.asarray(p["point"], dtype=float)
    d = np.asarray(p["direction"], dtype=float)
    if p0.shape != d.shape or p0.ndim != 1 or p0.size < 2:
        raise ParameterError("line point and direction must be vectors of equal length >= 2")
    if not np.any(d):
        raise ParameterError("line direction must be nonzero")

    def evaluate(w):
        w = np.asarray(w, dtype=float)[..., None]
        return p0 + w * d, np.broadcast_to(d, w.shape[:-1] + d.shape).copy(), np.zeros(w.shape[:-1] + d.shape)

    return ParametricPath(p0.size, evaluate, name="line")


def _trefoil(p):
    a, b = float(p["a"]), float(p["b"])
    w1, w2 = float(p["omega1"]), float(p["omega2"])

    def evaluate(w):
        s = np.asarray(w, dtype=float)
        if s.ndim == 0:
            return _trefoil_point(float(s), a, b, w1, w2)
        c1, s1 = np.cos(w1 * s), np.sin(w1 * s)
        c2, s2 = np.cos(w2 * s), np.sin(w2 * s)
        A = a * c2 + b
        A1 = -a * w2 * s2
        A2 = -a * w2 * w2 * c2
        z = np.zeros_like(s)
        f = np.stack([c1 * A, s1 * A, z], axis=-1)
        d1 = np.stack([-w1 * s1 * A + c1 * A1, w1 * c1 * A + s1 * A1, z], axis=-1)
        d2 = np.stack([
            -w1 * w1 * c1 * A - 2 * w1 * s1 * A1 + c1 * A2,
            -w1 * w1 * s1 * A + 2 * w1 * c1 * A1 + s1 * A2,
            z,
        ], axis=-1)
        return f, d1, d2

    return ParametricPath(3, evaluate, name="trefoil", period=common_period([w1, w2]))


def _trefoil_point(s, a, b, w1, w2):
    c1, s1 = math.cos(w1 * s), math.sin(w1 * s)
    c2, s2 = math.cos(w2 * s), math.sin(w2 * s)
    A, A1, A2 = a * c2 + b, -a * w2 * s2, -a * w2 * w2 * c2
    return (np.array([c1 * A, s1 * A, 0.0]),
            np.array([-w1 * s1 * A + c1 * A1, w1 * c1 * A + s1 * A1, 0.0]),
            np.array([-w1 * w1 * c1 * A - 2 * w1 * s1 * A1 + c1 * A2,
                      -w1 * w1 * s1 * A + 2 * w1 * c1 * A1 + s1 * A2, 0.0]))


def _lissajous3d(p):
    c = np.array([p["cx"], p["cy"], p["cz"]], dtype=float)
    om = np.array([p["wx"], p["wy"], p["wz"]], dtype=float)
    ph = np.array([p["dx"], p["dy"], p["dz"]], dtype=float)

    def evaluate(w):
        arg = np.asarray(w, dtype=float)[..., None] * om + ph
        cs, sn = np.cos(arg), np.sin(arg)
        return c * cs, -c * om * sn, -c * om * om * cs

    return ParametricPath(3, evaluate, name="lissajous3d", period=common_period(om))


_CATALOG = {
    "circle": (_circle, {}, {"r"}, {"omega", "center"}),
    "ellipse": (_ellipse, {}, {"a", "b"}, set()),
    "line": (_line, {}, {"point", "direction"}, set()),
    "trefoil": (_trefoil, TREFOIL_DEFAULTS, set(), set()),
    "lissajous3d": (_lissajous3d, LISSAJOUS_DEFAULTS, set(), set()),
}

CATALOG_NAMES = tuple(_CATALOG)


def catalog_make(name: str, params: Mapping | None = None) -> ParametricPath:
    """Build a catalog path.  Trefoil and Lissajous default to the flight parameters."""
    try:
        builder, defaults, required, optional = _CATALOG[name]
    except KeyError:
        raise CatalogError(f"unknown path type {name!r}; expected one of {', '.join(_CATALOG)}") from None
    merged = {**defaults, **(params or {})}
    missing = required - merged.keys()
    if missing:
        raise ParameterError(f"path {name!r} is missing parameter(s): {', '.join(sorted(missing))}")
    unknown = merged.keys() - required - optional - defaults.keys()
    if unknown:
        raise ParameterError(f"path {name!r} got unknown parameter(s): {', '.join(sorted(unknown))}")
    return builder(merged)


# --------------------------------------------------------------------------
# implicit descriptions
# --------------------------------------------------------------------------

def implicit_from_parametric(path: ParametricPath, L: float = 1.0,
                             rep: Reparameterization | None = None) -> SurfaceStack:
    """Surfaces ``phi_i = L (x_i - f_i(g(w)))`` on ``R^{n+1}``."""
    if not (0.0 < L <= 1.0):
        raise ParameterError(f"scaling L must lie in (0, 1], got {L}")
    rep = rep or Reparameterization()
    h = reparameterize(path, rep)
    n, m = path.n, path.n + 1
    L = float(L)

    def phi(xi):
        xi = np.asarray(xi, dtype=float)
        return L * (xi[..., :n] - h.evaluate(xi[..., n])[0])

    def grad(xi):
        xi = np.asarray(xi, dtype=float)
        _, h1, _ = h.evaluate(xi[..., n])
        N = np.zeros(xi.shape[:-1] + (m, n))
        idx = np.arange(n)
        N[..., idx, idx] = L
        N[..., n, :] = -L * h1
        return N

    def hessians(xi):
        xi = np.asarray(xi, dtype=float)
        _, _, h2 = h.evaluate(xi[..., n])
        H = np.zeros(xi.shape[:-1] + (n, m, m))
        H[..., :, n, n] = -L * h2
        return H

    return SurfaceStack(m, phi, grad, hessians, name=f"lifted-{path.name}")


def _fd_check(fun, dfun, m, points, what):
    for xi in points:
        g = np.asarray(dfun(xi), dtype=float)
        fd = np.empty_like(g)
        for j in range(m):
            step = 1e-6 * max(1.0, abs(xi[j]))
            e = np.zeros(m)
            e[j] = step
            fd[..., j] = (np.asarray(fun(xi + e)) - np.asarray(fun(xi - e))) / (2 * step)
        if np.max(np.abs(g - fd)) > 1e-4 * max(1.0, np.max(np.abs(g))):
            raise ValidationError(f"{what} disagrees with finite differences at {xi.tolist()}")


def implicit_direct(phi_list: Sequence[Callable], grad_list: Sequence[Callable],
                    second_list: Sequence[Callable] | None = None, *, m: int | None = None,
                    check_points=None, seed: int = 0, name: str = "implicit") -> SurfaceStack:
    """Wrap user-supplied surface functions as a :class:`SurfaceStack`.

    ``phi_list[i](xi)`` returns a scalar (or ``(...)`` array), ``grad_list[i]``
    the gradient ``(..., m)`` and ``second_list[i]`` the Hessian ``(..., m, m)``.
    Derivatives are checked against central differences at ``check_points``
    (default: 16 seeded points in ``[-2, 2]^m``).
    """
    count = len(phi_list)
    m = count + 1 if m is None else m
    if count != m - 1 or len(grad_list) != count or (second_list is not None and len(second_list) != count):
        raise ShapeError(f"need exactly m-1={m - 1} surfaces with matching derivative lists")

    def phi(xi):
        return np.stack([np.asarray(f(xi), dtype=float) for f in phi_list], axis=-1)

    def grad(xi):
        return np.stack([np.asarray(g(xi), dtype=float) for g in grad_list], axis=-1)

    hessians = None
    if second_list is not None:
        def hessians(xi):
            return np.stack([np.asarray(s(xi), dtype=float) for s in second_list], axis=-3)

    if check_points is None:
        check_points = np.random.default_rng(seed).uniform(-2.0, 2.0, size=(16, m))
    pts = np.atleast_2d(np.asarray(check_points, dtype=float))
    for i in range(count):
        _fd_check(phi_list[i], grad_list[i], m, pts, f"gradient of surface {i + 1}")
        if second_list is not None:
            _fd_check(grad_list[i], second_list[i], m, pts, f"Hessian of surface {i + 1}")
    return SurfaceStack(m, phi, grad, hessians, name=name)


def implicit_circle(r: float = 1.0) -> SurfaceStack:
    """``phi = x^2 + y^2 - r^2``."""
    r2 = float(r) ** 2
    return implicit_direct(
        [lambda p: p[..., 0] ** 2 + p[..., 1] ** 2 - r2],
        [lambda p: np.stack([2 * p[..., 0], 2 * p[..., 1]], axis=-1)],
        [lambda p: np.broadcast_to(2.0 * np.eye(2), np.shape(p)[:-1] + (2, 2))],
        name="implicit-circle",
    )


def implicit_figure8() -> SurfaceStack:
    """``phi = x^2 - 4 y^2 (1 - y^2)``, self-intersecting at the origin."""
    def hess(p):
        p = np.asarray(p, dtype=float)
        H = np.zeros(p.shape[:-1] + (2, 2))
        H[..., 0, 0] = 2.0
        H[..., 1, 1] = -8.0 + 48.0 * p[..., 1] ** 2
        return H

    return implicit_direct(
        [lambda p: p[..., 0] ** 2 - 4 * p[..., 1] ** 2 * (1 - p[..., 1] ** 2)],
        [lambda p: np.stack([2 * p[..., 0], -8 * p[..., 1] + 16 * p[..., 1] ** 3], axis=-1)],
        [hess],
        name="implicit-figure8",
    )


IMPLICIT_CATALOG = {"circle": implicit_circle, "figure8": implicit_figure8}


def implicit_make(name: str, params: Mapping | None = None) -> SurfaceStack:
    try:
        builder = IMPLICIT_CATALOG[name]
    except KeyError:
        raise CatalogError(f"no implicit description for {name!r}; expected one of "
                           f"{', '.join(IMPLICIT_CATALOG)}") from None
    try:
        return builder(**(params or {}))
    except TypeError as exc:
        raise ParameterError(str(exc)) from None
