import io
import math

import numpy as np
import pytest

from circlewave.expr import parse_nonlinearity
from circlewave.field import GridField, derivative_array, distance, grid
from circlewave.linear import (
    LinearCoefficients,
    SpectrumEstimate,
    constant_state_spectrum,
    eigenspace_basis,
    evolve_linear,
    finite_time_spectrum,
    fourier_basis,
    linearize_along,
    zero_bound_check,
)
from circlewave.solver import SolverConfig, integrate
import oracles

X = grid(128)


def test_linearize_at_constant_states():
    f = parse_nonlinearity("u - u^3")
    for c, b in ((0.0, 1.0), (1.0, -2.0)):
        traj = integrate(GridField.constant(c), f, SolverConfig(t_end=0.05))
        co = linearize_along(traj, f)
        a_t, b_t = co.at(0.025)
        assert np.all(a_t == 0.0)
        np.testing.assert_allclose(b_t, b, atol=1e-12)


def test_linearize_along_wave():
    phi = oracles.wave_profile()
    f = parse_nonlinearity("2*u - u^3 + 0.4*p")
    traj = integrate(GridField(phi), f, SolverConfig(t_end=1.0, record_stride=100))
    co = linearize_along(traj, f)
    for t, row in zip(traj.times, traj.states):
        a_t, b_t = co.at(t)
        np.testing.assert_allclose(a_t, 0.4, atol=1e-14)
        np.testing.assert_allclose(b_t, 2 - 3 * row**2, atol=1e-12)
    with pytest.raises(ValueError):
        co.at(1.5)


def test_sampled_coefficients_are_validated():
    with pytest.raises(ValueError):
        LinearCoefficients(16, np.zeros((3, 16)), np.zeros((2, 16)), times=[0, 1, 2])
    with pytest.raises(ValueError):
        LinearCoefficients(16, np.full((2, 16), np.nan), np.zeros((2, 16)), times=[0, 1])


def test_evolve_linear_examples():
    heat = LinearCoefficients.constant(0.0, 0.0)
    out = evolve_linear(np.sin(2 * X), heat, (0.0, 1.0)).final.values
    exact = math.exp(-4) * np.sin(2 * X)
    assert np.max(np.abs(out - exact)) <= 1e-5 * np.max(np.abs(exact))
    growth = LinearCoefficients.constant(0.0, 1.0)
    out = evolve_linear(np.full(128, 0.3), growth, (0.0, 2.0)).final.values
    np.testing.assert_allclose(out, 0.3 * math.exp(2.0), rtol=1e-5)


def test_profile_derivative_is_neutral_along_wave():
    phi = oracles.wave_profile()
    f = parse_nonlinearity("2*u - u^3 + 0.4*p")
    traj = integrate(GridField(phi), f, SolverConfig(t_end=10.0))
    co = linearize_along(traj, f)
    v0 = derivative_array(phi, 1)
    out = evolve_linear(v0, co, (0.0, 10.0), record_stride=100)
    n0 = distance(v0, np.zeros(128))
    norms = [distance(s, np.zeros(128)) / n0 for s in out.states]
    assert 0.5 <= min(norms) and max(norms) <= 2.0


def test_constant_state_spectrum_formula():
    s = constant_state_spectrum(0.0, 0.0, 3)
    np.testing.assert_array_equal(s.exponents, [0, -1, -1, -4, -4, -9, -9])
    assert s.multiplicities == [1, 2, 2, 2] and sum(s.multiplicities) == s.galerkin_dim
    s = constant_state_spectrum(0.3, 0.5, 3)
    np.testing.assert_allclose(s.distinct, [0.5, -0.5, -3.5, -8.5])
    s = constant_state_spectrum(0.0, 1.0, 2)
    assert (0.0, 2) in s.clusters()


def test_spectrum_csv_and_gaps():
    s = SpectrumEstimate(np.array([-4.0, 0.0, -1.0, -1.05]))
    assert list(s.exponents) == [0.0, -1.0, -1.05, -4.0]
    assert s.multiplicities == [1, 2, 1]
    assert s.dichotomy_gaps() == [(-1.0, 0.0), (-4.0, -1.05)]
    buf = io.StringIO()
    s.to_csv(buf)
    assert buf.getvalue().splitlines()[:2] == ["rank,exponent,multiplicity_hint", "0,0,1"]


def test_fourier_basis_is_orthonormal():
    B = fourier_basis(7, 128) * math.sqrt(2 * math.pi / 128)
    np.testing.assert_allclose(B @ B.T, np.eye(7), atol=1e-13)


@pytest.mark.parametrize(
    "a, b, window, expected",
    [
        (0.0, 0.0, (0.0, 10.0), [0, -1, -1, -4, -4]),
        (0.0, 0.5, (0.0, 20.0), [0.5, -0.5, -0.5, -3.5, -3.5]),
        (0.7, 0.5, (0.0, 20.0), [0.5, -0.5, -0.5, -3.5, -3.5]),
    ],
)
def test_finite_time_spectrum_at_constant_states(a, b, window, expected):
    est = finite_time_spectrum(LinearCoefficients.constant(a, b), window, m=5)
    assert np.max(np.abs(est.exponents - expected)) <= 0.05
    assert est.galerkin_dim == 5 and est.window == window


def test_late_window_spectrum_near_equilibrium():
    f = parse_nonlinearity("u - u^3")
    traj = integrate(GridField(0.5 + 0.1 * np.sin(X)), f, SolverConfig(t_end=30.0, dt=2e-3, record_stride=5))
    est = finite_time_spectrum(linearize_along(traj, f), (10.0, 30.0), m=5, dt=2e-3)
    expected = constant_state_spectrum(0.0, -2.0, 2).exponents
    assert np.max(np.abs(est.exponents - expected)) <= 0.1


def test_finite_time_spectrum_preconditions():
    co = LinearCoefficients.constant(0.0, 0.0)
    with pytest.raises(ValueError):
        finite_time_spectrum(co, (0.0, 10.0), m=4)
    with pytest.raises(ValueError):
        finite_time_spectrum(co, (0.0, 4.0), m=5)
    with pytest.raises(ValueError):
        finite_time_spectrum(LinearCoefficients.constant(0.0, 0.0, n=16), (0.0, 10.0), m=7)
    traj = integrate(GridField.constant(0.5), parse_nonlinearity("u"), SolverConfig(t_end=6.0, dt=0.01))
    sampled = linearize_along(traj, parse_nonlinearity("u"))
    with pytest.raises(ValueError, match="support"):
        finite_time_spectrum(sampled, (0.0, 5.0), m=5)  # spin-up would start before t = 0


def test_zero_bounds_on_eigenspaces():
    rep = zero_bound_check(eigenspace_basis([1]), 2, 2)
    assert rep.ok and rep.min_count == 2 and rep.max_count == 2
    rep = zero_bound_check(eigenspace_basis([2]), 4, 4)
    assert rep.ok and len(rep.counts) == 100
    rep = zero_bound_check(eigenspace_basis([0, 1, 2]), 0, 4)
    assert rep.ok
    rep = zero_bound_check(eigenspace_basis([3]), 2, 4)
    assert not rep.ok and rep.violations
