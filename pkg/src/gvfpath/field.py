"""Conventional and singularity-free guiding vector fields.

Both field families share one convention::

    chi(xi) = orientation * cross(grad phi_1, ..., grad phi_{m-1}) - N(xi) K e(xi)

For ``m = 2`` the one-argument cross product is ``-E grad phi``, so the
classic planar field ``E grad phi - k phi grad phi`` is ``orientation=-1``.
All evaluators accept batches: ``xi`` of shape ``(..., m)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError, SingularityError
from .paths import (ParametricPath, Reparameterization, SurfaceStack,
                    implicit_from_parametric, reparameterize)


@dataclass(frozen=True)
class GvfParams:
    k: tuple[float, ...]
    orientation: int = 1
    k_theta: float = 1.0

    def __post_init__(self):
        k = tuple(float(v) for v in np.atleast_1d(self.k))
        object.__setattr__(self, "k", k)
        if not k or not all(np.isfinite(v) and v > 0 for v in k):
            raise ParameterError(f"field gains must all be > 0, got {k}")
        if self.orientation not in (1, -1):
            raise ParameterError("orientation must be +1 or -1")
        if not self.k_theta > 0:
            raise ParameterError("k_theta must be > 0")

    @property
    def K(self) -> np.ndarray:
        return np.asarray(self.k)


@dataclass(frozen=True, eq=False)
class FieldSample:
    """A field value with its decomposition at one (or a batch of) point(s)."""

    chi: np.ndarray
    propagation: np.ndarray
    converging: np.ndarray
    e: np.ndarray
    N: np.ndarray
    jacobian: np.ndarray | None = field(default=None)


def cross_n(vectors) -> np.ndarray:
    """Generalized cross product of ``m - 1`` vectors in ``R^m``.

    ``vectors`` is a sequence (or array ``(..., m-1, m)``) stacked row-wise;
    component ``k`` is ``(-1)^k`` times the minor with column ``k`` removed
    (zero-based ``k``).
    """
    P = np.asarray(vectors, dtype=float)
    if P.ndim < 2:
        raise ShapeError("cross_n needs a stack of vectors")
    rows, m = P.shape[-2:]
    if m < 2 or rows != m - 1:
        raise ShapeError(f"cross_n needs m-1 vectors of length m, got {rows} of length {m}")
    out = np.empty(P.shape[:-2] + (m,))
    cols = np.arange(m)
    # exactly singular minors make LAPACK's LU divide by zero; the result is still 0
    with np.errstate(divide="ignore"):
        for k in range(m):
            out[..., k] = (-1) ** k * np.linalg.det(P[..., cols != k])
    return out


def _check_gains(params: GvfParams, count: int) -> np.ndarray:
    K = params.K
    if K.size == 1 and count > 1:
        K = np.full(count, K[0])
    if K.size != count:
        raise ShapeError(f"expected {count} gains, got {K.size}")
    return K


def stack_jacobian(stack: SurfaceStack, params: GvfParams, xi) -> np.ndarray:
    """Jacobian of the conventional field built from a stack with Hessians."""
    if stack.hessians is None:
        raise ShapeError(f"stack {stack.name!r} has no second derivatives")
    xi = np.asarray(xi, dtype=float)
    K = _check_gains(params, stack.count)
    e, N, H = stack.phi(xi), stack.grad(xi), stack.hessians(xi)
    rows = np.swapaxes(N, -1, -2)  # (..., m-1, m)
    m = stack.m
    J = np.zeros(xi.shape[:-1] + (m, m))
    # derivative of the cross product: replace one row at a time
    for j in range(m - 1):
        for col in range(m):
            R = rows.copy()
            R[..., j, :] = H[..., j, :, col]
            J[..., :, col] += cross_n(R)
    J *= params.orientation
    for i in range(m - 1):
        g = N[..., :, i]
        J -= K[i] * (g[..., :, None] * g[..., None, :] + e[..., i, None, None] * H[..., i, :, :])
    return J


def eval_conventional(stack: SurfaceStack, params: GvfParams, xi, *, jacobian: bool = False) -> FieldSample:
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != stack.m:
        raise ShapeError(f"point has dimension {xi.shape[-1]}, stack expects {stack.m}")
    K = _check_gains(params, stack.count)
    e = stack.phi(xi)
    N = stack.grad(xi)
    prop = params.orientation * cross_n(np.swapaxes(N, -1, -2))
    conv = -np.einsum("...ij,...j->...i", N, K * e)
    J = stack_jacobian(stack, params, xi) if jacobian else None
    return FieldSample(prop + conv, prop, conv, e, N, J)


def _sf_parts(path: ParametricPath, L: float, rep: Reparameterization | None, params: GvfParams, xi):
    if not (0.0 < L <= 1.0):
        raise ParameterError(f"scaling L must lie in (0, 1], got {L}")
    rep = rep or Reparameterization()
    n = path.n
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != n + 1:
        raise ShapeError(f"point has dimension {xi.shape[-1]}, field expects {n + 1}")
    K = _check_gains(params, n)
    h, h1, h2 = reparameterize(path, rep).evaluate(xi[..., n])
    phi = L * (xi[..., :n] - h)
    s = params.orientation * (-1) ** n * L ** n
    return n, K, phi, h1, h2, s


def eval_singularity_free(path: ParametricPath, L: float, rep: Reparameterization | None,
                          params: GvfParams, xi, *, jacobian: bool = False) -> FieldSample:
    """Closed-form field on ``R^{n+1}`` for ``phi_i = L (x_i - f_i(beta w))``."""
    n, K, phi, h1, h2, s = _sf_parts(path, L, rep, params, xi)
    Kphi = K * phi
    if phi.ndim == 1:
        # single point: avoid the batched index machinery
        prop = np.append(s * h1, s)
        conv = np.append(-L * Kphi, L * float(Kphi @ h1))
        N = np.zeros((n + 1, n))
        N[:n] = L * np.eye(n)
        N[n] = -L * h1
        J = _sf_jacobian(n, K, phi, h1, h2, s, L) if jacobian else None
        return FieldSample(prop + conv, prop, conv, phi, N, J)
    batch = phi.shape[:-1]
    prop = np.concatenate([s * h1, np.full(batch + (1,), s)], axis=-1)
    conv = np.concatenate([-L * Kphi, L * np.sum(Kphi * h1, axis=-1, keepdims=True)], axis=-1)
    N = np.zeros(batch + (n + 1, n))
    idx = np.arange(n)
    N[..., idx, idx] = L
    N[..., n, :] = -L * h1
    J = _sf_jacobian(n, K, phi, h1, h2, s, L) if jacobian else None
    return FieldSample(prop + conv, prop, conv, phi, N, J)


def _sf_jacobian(n, K, phi, h1, h2, s, L):
    batch = phi.shape[:-1]
    J = np.zeros(batch + (n + 1, n + 1))
    L2 = L * L
    idx = np.arange(n)
    J[..., idx, idx] = -K * L2
    J[..., :n, n] = s * h2 + K * L2 * h1
    J[..., n, :n] = K * L2 * h1
    J[..., n, n] = np.sum(K * (L * phi * h2 - L2 * h1 * h1), axis=-1)
    return J


def jacobian_field(path: ParametricPath, L: float, rep: Reparameterization | None,
                   params: GvfParams, xi) -> np.ndarray:
    """Analytic Jacobian of :func:`eval_singularity_free` with respect to ``xi``."""
    n, K, phi, h1, h2, s = _sf_parts(path, L, rep, params, xi)
    return _sf_jacobian(n, K, phi, h1, h2, s, L)


def _chi(sample_or_chi) -> np.ndarray:
    if isinstance(sample_or_chi, FieldSample):
        return sample_or_chi.chi
    return np.asarray(sample_or_chi, dtype=float)


def normalize(sample_or_chi) -> np.ndarray:
    chi = _chi(sample_or_chi)
    nrm = np.linalg.norm(chi, axis=-1, keepdims=True)
    if np.any(nrm == 0):
        raise SingularityError("cannot normalize a zero field vector (singular point)")
    return chi / nrm


def partial_normalize(sample_or_chi, n: int | None = None) -> np.ndarray:
    """Divide ``chi`` by the norm of its first ``n`` (physical) components."""
    chi = _chi(sample_or_chi)
    n = chi.shape[-1] - 1 if n is None else n
    nrm = np.linalg.norm(chi[..., :n], axis=-1, keepdims=True)
    if np.any(nrm == 0):
        raise SingularityError("physical part of the field vanishes")
    return chi / nrm


def projected_direction_jacobian(sample: FieldSample) -> np.ndarray:
    """Jacobian of the first two components of the unit field direction.

    ``F (I - u u^T) J(chi) / |chi|`` with ``u = chi / |chi|``.
    """
    if sample.jacobian is None:
        raise ShapeError("sample carries no Jacobian")
    chi = sample.chi
    nrm = np.linalg.norm(chi, axis=-1)
    if np.any(nrm == 0):
        raise SingularityError("direction Jacobian undefined at a singular point")
    u = chi / nrm[..., None]
    J = sample.jacobian
    # rows 0,1 of (I - u u^T) J
    top = J[..., :2, :] - u[..., :2, None] * np.einsum("...i,...ij->...j", u, J)[..., None, :]
    return top / nrm[..., None, None]


# --------------------------------------------------------------------------
# field objects used by the simulator
# --------------------------------------------------------------------------

class SingularityFreeField:
    """Field on ``R^{n+1}`` generated from a parametric path."""

    has_virtual = True

    def __init__(self, path: ParametricPath, params: GvfParams, L: float = 1.0,
                 rep: Reparameterization | None = None):
        if not (0.0 < L <= 1.0):
            raise ParameterError(f"scaling L must lie in (0, 1], got {L}")
        self.path = path
        self.params = params
        self.L = float(L)
        self.rep = rep or Reparameterization()
        self.dim = path.n + 1
        self.n_physical = path.n
        self._K = tuple(_check_gains(params, path.n).tolist())
        self._h = reparameterize(path, self.rep)
        self._s = params.orientation * (-1) ** path.n * self.L ** path.n

    def point(self, xi) -> tuple[list[float], list[list[float]]]:
        """Field value and Jacobian at one point as plain lists.

        Same closed form as :meth:`sample` with ``jacobian=True``, without
        array overhead; used in the per-step guidance loop.
        """
        n, L, s, K = self.n_physical, self.L, self._s, self._K
        h, h1, h2 = self._h.evaluate(float(xi[n]))
        h, h1, h2 = h.tolist(), h1.tolist(), h2.tolist()
        L2 = L * L
        chi = [0.0] * (n + 1)
        J = [[0.0] * (n + 1) for _ in range(n + 1)]
        last, jnn = s, 0.0
        for i in range(n):
            phi = L * (float(xi[i]) - h[i])
            kp = K[i] * phi
            chi[i] = s * h1[i] - L * kp
            last += L * kp * h1[i]
            J[i][i] = -K[i] * L2
            J[i][n] = s * h2[i] + K[i] * L2 * h1[i]
            J[n][i] = K[i] * L2 * h1[i]
            jnn += K[i] * (L * phi * h2[i] - L2 * h1[i] * h1[i])
        chi[n] = last
        J[n][n] = jnn
        return chi, J

    def sample(self, xi, jacobian: bool = False) -> FieldSample:
        return eval_singularity_free(self.path, self.L, self.rep, self.params, xi, jacobian=jacobian)

    def __call__(self, xi) -> np.ndarray:
        return self.sample(xi).chi

    def jacobian(self, xi) -> np.ndarray:
        return jacobian_field(self.path, self.L, self.rep, self.params, xi)

    def stack(self) -> SurfaceStack:
        return implicit_from_parametric(self.path, self.L, self.rep)

    @property
    def guiding_path(self) -> ParametricPath:
        """The physical path in its re-parameterized form ``f(g(w))``."""
        return self._h

    def guiding_point(self, w):
        return self._h.f(w)


class ConventionalField:
    """Field on ``R^m`` from an arbitrary surface stack."""

    has_virtual = False

    def __init__(self, stack: SurfaceStack, params: GvfParams):
        self.stack_ = stack
        self.params = params
        self.dim = stack.m
        self.n_physical = stack.m
        _check_gains(params, stack.count)

    def sample(self, xi, jacobian: bool = False) -> FieldSample:
        return eval_conventional(self.stack_, self.params, xi, jacobian=jacobian)

    def __call__(self, xi) -> np.ndarray:
        return self.sample(xi).chi

    def jacobian(self, xi) -> np.ndarray:
        return stack_jacobian(self.stack_, self.params, xi)

    def stack(self) -> SurfaceStack:
        return self.stack_
