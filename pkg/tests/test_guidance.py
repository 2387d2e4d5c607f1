import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvfpath.errors import ExcludedSetError, ParameterError
from gvfpath.field import FieldSample, GvfParams, SingularityFreeField
from gvfpath.guidance import (E, VehicleState, guidance_step, heading_error, heading_lyapunov,
                              heading_lyapunov_rate, wrap_angle)
from gvfpath.paths import AffinePose, Reparameterization, apply_affine, catalog_make
from gvfpath.sim import EXCLUDED_SET, Disturbance, Unicycle, integrate

OFFSET = (79.0, -68.10, 50.0)


def flight_field():
    tre = apply_affine(catalog_make("trefoil"), AffinePose(0.0, OFFSET))
    return SingularityFreeField(tre, GvfParams((0.002,) * 3, k_theta=1.0), 0.1, Reparameterization(0.45))


def bare_sample(chi, J=None):
    chi = np.asarray(chi, dtype=float)
    m = chi.size
    return FieldSample(chi, chi, 0 * chi, np.zeros(m - 1), np.zeros((m, m - 1)),
                       np.zeros((m, m)) if J is None else np.asarray(J, dtype=float))


def state(theta, v=12.0):
    return VehicleState((0.0, 0.0, 0.0), theta, 0.0, v)


# --------------------------------------------------------------------------
# heading error
# --------------------------------------------------------------------------

def test_heading_error_aligned():
    assert heading_error(state(0.7), bare_sample([math.cos(0.7), math.sin(0.7), 0, 1])) == pytest.approx(0.0, abs=1e-15)


def test_heading_error_quarter():
    assert heading_error(state(0.0), bare_sample([0, 1, 0, 1])) == pytest.approx(-math.pi / 2)


def test_heading_error_antipodal():
    assert heading_error(state(math.pi), bare_sample([1, 0, 0, 1])) == pytest.approx(math.pi)


def test_heading_error_excluded():
    with pytest.raises(ExcludedSetError):
        heading_error(state(0.0), bare_sample([0, 0, 1, 1]))


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(-math.pi, math.pi))
def test_heading_error_range_and_sign(theta, phi):
    chi = [math.cos(phi), math.sin(phi), 0.3, -0.2]
    beta = heading_error(state(theta), bare_sample(chi))
    assert -math.pi < beta <= math.pi
    # rotating the field direction by beta gives the heading
    assert math.cos(phi + beta) == pytest.approx(math.cos(theta), abs=1e-9)
    assert math.sin(phi + beta) == pytest.approx(math.sin(theta), abs=1e-9)


def test_wrap_angle():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(0.25) == 0.25


# --------------------------------------------------------------------------
# guidance step
# --------------------------------------------------------------------------

def test_step_speed_scaling():
    out = guidance_step(state(0.0), bare_sample([1, 0, 2, 3]), 1.0)
    assert out.u_z == 24.0
    assert out.w_dot == 36.0


def test_step_zero_when_aligned_and_static():
    out = guidance_step(state(0.0), bare_sample([1, 0, 2, 3]), 1.0)
    assert out.theta_d_dot == 0.0
    assert out.u_theta == 0.0


def test_step_heading_correction_sign():
    out = guidance_step(state(0.0), bare_sample([0, 1, 0, 1]), 1.0)
    assert out.alignment == pytest.approx(-1.0)
    assert out.u_theta == pytest.approx(1.0)


def test_step_errors():
    with pytest.raises(ExcludedSetError):
        guidance_step(state(0.0), bare_sample([0, 0, 1, 1]), 1.0)
    with pytest.raises(ParameterError):
        guidance_step(state(0.0, v=0.0), bare_sample([1, 0, 0, 1]), 1.0)
    with pytest.raises(ParameterError):
        guidance_step(state(0.0), bare_sample([1, 0, 0, 1]), 0.0)


def random_states(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        pos = rng.uniform(-300, 300, 3)
        yield VehicleState(tuple(pos), rng.uniform(-math.pi, math.pi), rng.uniform(-100, 100), 12.0)


def test_recomposition_exact():
    f = flight_field()
    for vs in random_states(0, 50):
        out = guidance_step(vs, f.sample(vs.xi, jacobian=True), 1.3)
        assert out.u_theta == out.theta_d_dot - 1.3 * out.alignment
        assert out.alignment == pytest.approx(math.sin(out.heading_error), abs=1e-12)


def test_feedforward_matches_planar_angle_rate():
    # independent oracle: d/dt atan2(chi_2, chi_1) = (chi_1 chi_2' - chi_2 chi_1') / |chi_12|^2
    f = flight_field()
    for vs in random_states(1, 50):
        s = f.sample(vs.xi, jacobian=True)
        out = guidance_step(vs, s, 1.0)
        xi_dot = np.array([12 * math.cos(vs.theta), 12 * math.sin(vs.theta), out.u_z, out.w_dot])
        cd = s.jacobian @ xi_dot
        oracle = (s.chi[0] * cd[1] - s.chi[1] * cd[0]) / (s.chi[0] ** 2 + s.chi[1] ** 2)
        assert out.theta_d_dot == pytest.approx(oracle, rel=1e-9, abs=1e-15)


def test_explicit_xi_dot_used():
    f = flight_field()
    vs = next(random_states(2, 1))
    s = f.sample(vs.xi, jacobian=True)
    a = guidance_step(vs, s, 1.0)
    b = guidance_step(vs, s, 1.0, xi_dot=np.zeros(4))
    assert b.theta_d_dot == 0.0
    assert a.u_z == b.u_z and a.w_dot == b.w_dot


def test_velocity_alignment_at_zero_error():
    f = flight_field()
    for vs in random_states(3, 20):
        chi = f(vs.xi)
        aligned = VehicleState(vs.position, math.atan2(chi[1], chi[0]), vs.w, 12.0)
        out = guidance_step(aligned, f.sample(aligned.xi, jacobian=True), 1.0)
        assert out.heading_error == pytest.approx(0.0, abs=1e-12)
        vel = np.array([12 * math.cos(aligned.theta), 12 * math.sin(aligned.theta), out.u_z, out.w_dot])
        np.testing.assert_allclose(vel, 12 * chi / math.hypot(chi[0], chi[1]), rtol=1e-12, atol=1e-12)


def test_lyapunov_helpers():
    assert heading_lyapunov(0.0) == 0.0
    assert heading_lyapunov(math.pi) == 2.0
    assert heading_lyapunov_rate(0.4, 2.0) == pytest.approx(-0.32)
    assert heading_lyapunov_rate(0.0, 2.0) == 0.0


def test_fast_rhs_matches_reference():
    f = flight_field()
    uni = Unicycle(f, 12.0, wind=Disturbance("constant", (1.0, -2.0, 0.5)))
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = np.r_[rng.uniform(-300, 300, 3), rng.uniform(-3, 3), rng.uniform(-100, 100)]
        ref = uni.guidance(0.0, x)
        rhs = uni.rhs(0.0, x)
        assert rhs[3] == pytest.approx(ref.u_theta, rel=1e-12, abs=1e-15)
        assert rhs[4] == pytest.approx(ref.w_dot, rel=1e-14)
        assert rhs[2] == pytest.approx(ref.u_z + 0.5, rel=1e-14)


# --------------------------------------------------------------------------
# closed loop
# --------------------------------------------------------------------------

def closed_loop(beta0, T=20.0, k_theta=1.0, wind=None):
    f = flight_field()
    uni = Unicycle(f, 12.0, k_theta, wind)
    pos, w = (0.0, 100.0, 50.0), 0.0
    x0 = uni.initial_state(pos, uni.aligned_heading(pos, w, beta0), w)
    return integrate(uni, x0, dt=0.02, T=T)


@pytest.mark.parametrize("beta0", [-3.0, -1.5, 0.5, 3.0])
def test_heading_error_follows_closed_form(beta0):
    traj = closed_loop(beta0, T=10.0, k_theta=1.0)
    t = traj.t
    expected = 2 * np.arctan(math.tan(beta0 / 2) * np.exp(-t))
    np.testing.assert_allclose(traj.beta, expected, atol=1e-6)


def test_heading_error_closed_form_with_wind():
    wind = Disturbance("constant", (1.0, 0.5, 0.0))
    traj = closed_loop(-1.5, T=10.0, k_theta=0.7, wind=wind)
    expected = 2 * np.arctan(math.tan(-0.75) * np.exp(-0.7 * traj.t))
    np.testing.assert_allclose(traj.beta, expected, atol=1e-6)


def test_heading_lyapunov_nonincreasing():
    traj = closed_loop(2.5, T=20.0)
    V = 1 - np.cos(traj.beta)
    assert np.diff(V).max() <= 1e-9 * 0.02
    assert np.diff(np.abs(traj.beta)).max() <= 1e-6
    assert abs(traj.beta[-1]) <= 1e-3


def test_antipodal_start_is_excluded():
    traj = closed_loop(math.pi, T=1.0)
    assert traj.termination == EXCLUDED_SET
    assert len(traj) == 1


def test_rotation_matrix():
    np.testing.assert_array_equal(E @ np.array([0.0, 1.0]), [-1.0, 0.0])
