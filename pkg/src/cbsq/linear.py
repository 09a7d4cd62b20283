"""Exact and semi-analytic solutions of the linearized system.

Every mode decouples in the sheared frame: the dissipation symbol has the
closed-form time integral

    Phi(k, eta, t) = sigma*k^2*t + eta^2*t - eta*k*t^2 + k^2*t^3/3
                   = int_0^t sigma*k^2 + (eta - k*tau)^2 dtau,

so the scalar drift-diffusion flow is a pure multiplier and the coupled
vorticity equation reduces to a per-mode Duhamel integral with a smooth
explicit integrand.  nu != mu is supported here (the nonlinear solver
assumes nu == mu).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalAccuracyError
from .spectral import PhysicsParams, SpectralField

QUAD_MAX_PANELS = 2 ** 16
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass
class LinearState:
    """Vorticity/temperature pair evolving under the linearized system."""

    omega: SpectralField
    theta: SpectralField
    params: PhysicsParams

    def __post_init__(self):
        if self.omega.lattice != self.theta.lattice:
            raise DomainError("omega and theta must share a lattice")
        if self.omega.time != self.theta.time:
            raise DomainError("omega and theta must share a time")

    @property
    def t(self) -> float:
        return self.omega.time


def shear_heat_phase(k, eta, t, sigma):
    """Phi(k, eta, t): exact value of int_0^t sigma*k^2 + (eta - k*tau)^2 dtau."""
    k = np.asarray(k, dtype=float)
    eta = np.asarray(eta, dtype=float)
    out = sigma * k ** 2 * t + eta ** 2 * t - eta * k * t ** 2 + k ** 2 * t ** 3 / 3.0
    return out if np.ndim(out) else float(out)


def phase_increment(k, eta, t0, t1, sigma):
    """Phi(t1) - Phi(t0) = int_{t0}^{t1} sigma*k^2 + (eta - k*tau)^2 dtau."""
    return shear_heat_phase(k, eta, t1, sigma) - shear_heat_phase(k, eta, t0, sigma)


def evolve_scalar_exact(F0: SpectralField, nu: float, sigma: int, t: float) -> SpectralField:
    """Advance the scalar drift-diffusion flow by elapsed time t (exact)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    lat = F0.lattice
    t0 = F0.time
    dphi = phase_increment(lat.k, lat.eta, t0, t0 + t, sigma)
    return F0.with_coeffs(F0.coeffs * np.exp(-nu * dphi), time=t0 + t)


def _duhamel_integrand(s, state0: LinearState, t1: float):
    """exp(-nu(Phi(t1)-Phi(s)) - mu(Phi(s)-Phi(t0))) * ik * Theta0, per mode."""
    lat = state0.omega.lattice
    p = state0.params
    t0 = state0.t
    phi_s = shear_heat_phase(lat.k, lat.eta, s, p.sigma)
    phi_t0 = shear_heat_phase(lat.k, lat.eta, t0, p.sigma)
    phi_t1 = shear_heat_phase(lat.k, lat.eta, t1, p.sigma)
    damp = np.exp(-p.nu * (phi_t1 - phi_s) - p.mu * (phi_s - phi_t0))
    return 1j * lat.k * state0.theta.coeffs * damp


def _composite_gl(state0: LinearState, t1: float, panels: int) -> np.ndarray:
    t0 = state0.t
    edges = np.linspace(t0, t1, panels + 1)
    half = 0.5 * (t1 - t0) / panels
    total = np.zeros_like(state0.omega.coeffs)
    for p0, p1 in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (p0 + p1)
        for node, w in zip(_GL_NODES, _GL_WEIGHTS):
            total = total + w * _duhamel_integrand(mid + half * node, state0, t1)
    return total * half


def evolve_coupled_exact(state0: LinearState, t: float, quad_tol: float = 1e-10) -> LinearState:
    """Advance the coupled linear system by elapsed time t.

    Theta is exact; Omega combines the exact homogeneous decay with the
    buoyancy Duhamel integral evaluated by panel-doubling composite
    Gauss-Legendre quadrature to relative tolerance quad_tol.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    if quad_tol <= 0:
        raise DomainError("quad_tol must be positive")
    p = state0.params
    t1 = state0.t + t
    theta = evolve_scalar_exact(state0.theta, p.mu, p.sigma, t)
    omega_h = evolve_scalar_exact(state0.omega, p.nu, p.sigma, t)
    if t == 0 or not np.any(state0.theta.coeffs):
        return LinearState(omega_h, theta, p)

    panels = 4
    integral = _composite_gl(state0, t1, panels)
    scale = max(float(np.abs(integral).max()),
                float(np.abs(omega_h.coeffs).max()), 1e-300)
    while True:
        panels *= 2
        if panels > QUAD_MAX_PANELS:
            raise NumericalAccuracyError(
                f"Duhamel quadrature did not converge to {quad_tol} within "
                f"{QUAD_MAX_PANELS} panels")
        refined = _composite_gl(state0, t1, panels)
        err = float(np.abs(refined - integral).max())
        integral = refined
        scale = max(scale, float(np.abs(integral).max()))
        if err <= quad_tol * scale:
            break
    omega = omega_h.with_coeffs(omega_h.coeffs + integral)
    return LinearState(omega, theta, p)


def evolve_linear_stepper(state0: LinearState, t_end: float, dt: float,
                          scheme: str = "midpoint") -> LinearState:
    """March the linear system with exact integrating factor per step.

    The homogeneous decay and the theta equation are exact; the buoyancy
    forcing integral is approximated per step by the midpoint rule
    (order 2) or by Simpson weights, which is what the integrating-factor
    RK4 stage pattern reduces to for this forced diagonal system (order 4).
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    if scheme not in ("midpoint", "rk4"):
        raise DomainError(f"unknown scheme {scheme!r}")
    lat = state0.omega.lattice
    p = state0.params
    k, eta = lat.k, lat.eta
    t = state0.t
    t_stop = state0.t + t_end
    W = state0.omega.coeffs.copy()
    T = state0.theta.coeffs.copy()
    T0 = state0.theta.coeffs
    phi_t0 = shear_heat_phase(k, eta, state0.t, p.sigma)

    def theta_at(s):
        return T0 * np.exp(-p.mu * (shear_heat_phase(k, eta, s, p.sigma) - phi_t0))

    while t < t_stop - 1e-14 * max(1.0, t_stop):
        h = min(dt, t_stop - t)
        t1 = t + h
        mid = t + 0.5 * h
        E = np.exp(-p.nu * phase_increment(k, eta, t, t1, p.sigma))
        E_mid = np.exp(-p.nu * phase_increment(k, eta, mid, t1, p.sigma))
        f_mid = 1j * k * theta_at(mid)
        if scheme == "midpoint":
            forcing = h * E_mid * f_mid
        else:
            f0 = 1j * k * theta_at(t)
            f1 = 1j * k * theta_at(t1)
            forcing = (h / 6.0) * (E * f0 + 4.0 * E_mid * f_mid + f1)
        W = E * W + forcing
        t = t1
    T = theta_at(t)
    omega = state0.omega.with_coeffs(W, time=t)
    theta = state0.theta.with_coeffs(T, time=t)
    return LinearState(omega, theta, p)
