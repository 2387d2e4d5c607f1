"""Heading/climb/virtual-coordinate guidance for a 3D unicycle.

The vehicle follows a four-dimensional singularity-free field over
``(x, y, z, w)``.  ``w_dot`` and ``u_z`` scale the field so that its planar
part has the vehicle's ground speed; ``u_theta`` combines a feedforward
turn rate with a heading correction proportional to ``sin(heading_error)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExcludedSetError, ParameterError
from .field import FieldSample, projected_direction_jacobian

E = np.array([[0.0, -1.0], [1.0, 0.0]])


def wrap_angle(a):
    """Principal value in ``(-pi, pi]``."""
    return math.pi - (math.pi - a) % (2 * math.pi)


@dataclass(frozen=True)
class VehicleState:
    position: tuple[float, float, float]
    theta: float
    w: float
    v: float = 12.0

    @property
    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def xi(self) -> np.ndarray:
        return np.array([*self.position, self.w], dtype=float)


@dataclass(frozen=True)
class GuidanceOutput:
    u_theta: float
    u_z: float
    w_dot: float
    theta_d_dot: float
    heading_error: float
    # sin(heading_error) == h^T E chi_p_hat; kept for exact recomposition
    alignment: float = 0.0


def _planar(chi) -> tuple[np.ndarray, float]:
    nrm = math.hypot(chi[0], chi[1])
    if nrm == 0.0:
        raise ExcludedSetError("planar part of the field vanishes (chi_1^2 + chi_2^2 = 0)")
    return np.array([chi[0], chi[1]]) / nrm, nrm


def heading_error(state: VehicleState, sample: FieldSample | np.ndarray) -> float:
    """Signed angle rotating the planar field direction onto the heading."""
    chi = sample.chi if isinstance(sample, FieldSample) else np.asarray(sample, dtype=float)
    d, _ = _planar(chi)
    h = state.heading
    return wrap_angle(math.atan2(d[0] * h[1] - d[1] * h[0], d[0] * h[0] + d[1] * h[1]))


def guidance_step(state: VehicleState, sample: FieldSample, k_theta: float,
                  xi_dot=None, wind=None) -> GuidanceOutput:
    """Evaluate the guidance law at one state.

    When ``xi_dot`` is omitted the generalized velocity is rebuilt from the
    model, ``(v cos theta, v sin theta, u_z, w_dot)`` plus ``wind`` on the
    position rows, using this step's ``u_z`` and ``w_dot``.
    """
    if not state.v > 0:
        raise ParameterError("ground speed must be > 0")
    if not k_theta > 0:
        raise ParameterError("k_theta must be > 0")
    chi = sample.chi
    d, planar_norm = _planar(chi)
    scale = state.v / planar_norm
    w_dot = scale * chi[3]
    u_z = scale * chi[2]

    h = state.heading
    if xi_dot is None:
        xi_dot = np.array([h[0] * state.v, h[1] * state.v, u_z, w_dot])
        if wind is not None:
            xi_dot[:3] += wind
    Jp = projected_direction_jacobian(sample)
    # chi^p = first two entries of the unit field vector
    chip_norm = planar_norm / math.sqrt(float(chi @ chi))
    theta_d_dot = -float(d @ E @ (Jp @ np.asarray(xi_dot, dtype=float))) / chip_norm

    align = float(h @ E @ d)
    beta = wrap_angle(math.atan2(d[0] * h[1] - d[1] * h[0], d[0] * h[0] + d[1] * h[1]))
    return GuidanceOutput(
        u_theta=theta_d_dot - k_theta * align,
        u_z=u_z,
        w_dot=w_dot,
        theta_d_dot=theta_d_dot,
        heading_error=beta,
        alignment=align,
    )


def heading_lyapunov(beta: float) -> float:
    """``1 - cos(beta)``, the heading-error Lyapunov function."""
    return 1.0 - math.cos(beta)


def heading_lyapunov_rate(alignment: float, k_theta: float) -> float:
    return -k_theta * alignment * alignment
