"""Exact linear flows, Duhamel quadrature and the linear stepper."""

import math

import numpy as np
import pytest

from cbsq.errors import DomainError
from cbsq.linear import (LinearState, evolve_coupled_exact,
                         evolve_linear_stepper, evolve_scalar_exact,
                         phase_increment, shear_heat_phase)
from cbsq.spectral import (FrequencyLattice, PhysicsParams, SpectralField,
                           random_real_field, weighted_l2_norm, zero_field)


@pytest.fixture
def lat():
    return FrequencyLattice(8, 32, 16.0 * math.pi)


def _state(lat, nu=1e-2, mu=1e-2, sigma=0, seed=7):
    rng = np.random.default_rng(seed)
    p = PhysicsParams(nu=nu, mu=mu, sigma=sigma, b=1.5)
    w = random_real_field(lat, rng, kband=3, jband=10)
    th = random_real_field(lat, rng, kband=3, jband=10)
    return LinearState(w, th, p)


def test_phase_closed_form_values():
    # int_0^1 (1 - tau)^2 dtau = 1/3
    assert shear_heat_phase(1, 1, 1.0, 0) == pytest.approx(1.0 / 3.0)
    # sigma=1, k=1, eta=0, t=2: 2 + 8/3
    assert shear_heat_phase(1, 0, 2.0, 1) == pytest.approx(14.0 / 3.0)
    assert shear_heat_phase(0, 2, 3.0, 0) == pytest.approx(12.0)


def test_phase_matches_quadrature():
    from numpy.polynomial.legendre import leggauss
    nodes, weights = leggauss(40)
    for k, eta, t, sigma in ((3, -1.7, 2.3, 0), (-2, 4.0, 5.0, 1), (1, 0.0, 7.0, 0)):
        tau = 0.5 * t * (nodes + 1)
        integrand = sigma * k ** 2 + (eta - k * tau) ** 2
        quad = 0.5 * t * np.sum(weights * integrand)
        assert shear_heat_phase(k, eta, t, sigma) == pytest.approx(quad, rel=1e-12)


def test_phase_increment_additive():
    a = phase_increment(2, 1.5, 0.0, 1.0, 0) + phase_increment(2, 1.5, 1.0, 3.0, 0)
    assert a == pytest.approx(shear_heat_phase(2, 1.5, 3.0, 0))


def test_scalar_exact_single_mode(lat):
    c = np.zeros((lat.Nx, lat.Ny), dtype=complex)
    c[0, 8] = 1.0  # pure vertical mode: plain heat decay exp(-nu*eta^2*t)
    f = SpectralField(lat, c)
    nu, t = 0.5, 2.0
    eta = 8 * lat.eta_spacing
    out = evolve_scalar_exact(f, nu, 0, t)
    assert out.coeffs[0, 8] == pytest.approx(math.exp(-nu * eta ** 2 * t))
    assert out.time == t


def test_scalar_exact_semigroup(lat):
    rng = np.random.default_rng(0)
    f = random_real_field(lat, rng)
    one = evolve_scalar_exact(f, 1e-2, 1, 2.0)
    two = evolve_scalar_exact(evolve_scalar_exact(f, 1e-2, 1, 0.7), 1e-2, 1, 1.3)
    assert np.abs(one.coeffs - two.coeffs).max() < 1e-15
    with pytest.raises(DomainError):
        evolve_scalar_exact(f, 1e-2, 1, -1.0)


def test_coupled_exact_matches_closed_form_at_equal_viscosities(lat):
    # with nu == mu the Duhamel integrand is constant in s per mode:
    # Omega(t) = exp(-nu dPhi) (Omega0 + i k t Theta0)
    st = _state(lat, nu=1e-2, mu=1e-2, sigma=0)
    t = 3.0
    out = evolve_coupled_exact(st, t)
    dphi = phase_increment(lat.k, lat.eta, 0.0, t, 0)
    want = np.exp(-1e-2 * dphi) * (st.omega.coeffs + 1j * lat.k * t * st.theta.coeffs)
    assert np.abs(out.omega.coeffs - want).max() < 1e-12 * np.abs(want).max()
    assert np.abs(out.theta.coeffs
                  - np.exp(-1e-2 * dphi) * st.theta.coeffs).max() < 1e-14


def test_coupled_exact_zero_theta_reduces_to_scalar(lat):
    st = _state(lat)
    st = LinearState(st.omega, zero_field(lat), st.params)
    out = evolve_coupled_exact(st, 2.0)
    want = evolve_scalar_exact(st.omega, st.params.nu, st.params.sigma, 2.0)
    assert np.array_equal(out.omega.coeffs, want.coeffs)


def test_stepper_matches_exact_small_dt(lat):
    st = _state(lat, nu=1e-2, mu=3e-2, sigma=1)
    t = 2.0
    exact = evolve_coupled_exact(st, t, quad_tol=1e-12)
    for scheme, tol in (("midpoint", 1e-5), ("rk4", 1e-9)):
        num = evolve_linear_stepper(st, t, 1e-2, scheme=scheme)
        err = weighted_l2_norm(num.omega.with_coeffs(
            num.omega.coeffs - exact.omega.coeffs))
        assert err / weighted_l2_norm(exact.omega) < tol
        assert np.abs(num.theta.coeffs - exact.theta.coeffs).max() < 1e-13


def test_stepper_convergence_orders(lat):
    # measured at nu != mu; at nu == mu the per-step forcing integrand is
    # constant and both schemes are exact
    st = _state(lat, nu=1e-2, mu=3e-2, sigma=0)
    t = 1.0
    exact = evolve_coupled_exact(st, t, quad_tol=1e-12)
    for scheme, expect in (("midpoint", 2.0), ("rk4", 4.0)):
        errs = []
        for dt in (0.04, 0.02, 0.01):
            num = evolve_linear_stepper(st, t, dt, scheme=scheme)
            errs.append(float(np.abs(num.omega.coeffs - exact.omega.coeffs).max()))
        order = math.log(errs[0] / errs[2]) / math.log(4.0)
        assert order == pytest.approx(expect, abs=0.2)


def test_stepper_validation(lat):
    st = _state(lat)
    with pytest.raises(DomainError):
        evolve_linear_stepper(st, 1.0, 0.0)
    with pytest.raises(DomainError):
        evolve_linear_stepper(st, 1.0, 0.1, scheme="euler")


def test_state_time_consistency(lat):
    w = zero_field(lat, time=0.0)
    th = zero_field(lat, time=1.0)
    with pytest.raises(DomainError):
        LinearState(w, th, PhysicsParams(nu=1e-3, mu=1e-3))
