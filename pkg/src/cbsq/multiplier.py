"""Hypocoercivity multipliers and their pointwise inequalities.

The taper profile ``phi`` is a closed-form C^1 function: its derivative is
1/4 on [-1, 1], decays as a cosine-squared bump on 1 < |s| <= 3 and
vanishes beyond, with total rise exactly 1.  Only pointwise values of phi
and phi' ever enter a computation, so the closed form makes the derivative
identity exactly testable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, VerificationError
from .spectral import FrequencyLattice


def phi(s):
    """Non-decreasing taper: 0 below -3, 1 above 3, slope 1/4 on [-1, 1]."""
    s = np.asarray(s, dtype=float)
    a = np.minimum(np.abs(s), 3.0)
    ramp = np.where(a <= 1.0, 0.25 * a,
                    0.25 + 0.125 * (a - 1.0) + (0.25 / math.pi)
                    * np.sin(0.5 * math.pi * (a - 1.0)))
    out = 0.5 + np.sign(s) * ramp
    return out if out.ndim else float(out)


def phi_prime(s):
    """Derivative of ``phi``: 1/4 on |s|<=1, cosine-squared taper to |s|=3."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    out = np.where(a <= 1.0, 0.25,
                   np.where(a < 3.0,
                            0.25 * np.cos(0.25 * math.pi * (a - 1.0)) ** 2,
                            0.0))
    return out if out.ndim else float(out)


def m1_symbol(k, xi, nu: float):
    """M1(k, xi) = phi(nu^(1/3) |k|^(-1/3) sgn(k) xi); zero at k=0."""
    if nu <= 0:
        raise DomainError("nu must be positive")
    k = np.asarray(k, dtype=float)
    xi = np.asarray(xi, dtype=float)
    absk = np.abs(k)
    safe = np.where(absk > 0, absk, 1.0)
    arg = nu ** (1.0 / 3.0) * safe ** (-1.0 / 3.0) * np.sign(k) * xi
    out = np.where(absk > 0, phi(arg), 0.0)
    return out if out.ndim else float(out)


def m2_symbol(k, xi):
    """M2(k, xi) = (arctan(xi/k) + pi/2) / k^2; zero at k=0."""
    k = np.asarray(k, dtype=float)
    xi = np.asarray(xi, dtype=float)
    safe = np.where(k != 0, k, 1.0)
    out = np.where(k != 0,
                   (np.arctan(xi / safe) + 0.5 * math.pi) / safe ** 2,
                   0.0)
    return out if out.ndim else float(out)


def m_symbol(k, xi, nu: float):
    """M = 1 + M1 + M2; satisfies 1 <= M <= 2 + pi."""
    return 1.0 + m1_symbol(k, xi, nu) + m2_symbol(k, xi)


def k_dxi_m(k, xi, nu: float):
    """Analytic k * d/dxi of M for k != 0:

    nu^(1/3) |k|^(2/3) phi'(nu^(1/3)|k|^(-1/3) sgn(k) xi) + 1/(k^2 + xi^2).
    """
    if nu <= 0:
        raise DomainError("nu must be positive")
    k = np.asarray(k, dtype=float)
    if np.any(k == 0):
        raise DomainError("k_dxi_m is undefined at k=0")
    xi = np.asarray(xi, dtype=float)
    absk = np.abs(k)
    arg = nu ** (1.0 / 3.0) * absk ** (-1.0 / 3.0) * np.sign(k) * xi
    out = nu ** (1.0 / 3.0) * absk ** (2.0 / 3.0) * phi_prime(arg) \
        + 1.0 / (k ** 2 + xi ** 2)
    return out if out.ndim else float(out)


def m_vertical_symbol(k, xi, mu: float):
    """Per-mode vertical multiplier phi(mu^(1/3)|k|^(-1/3) sgn(k) xi); 0 at k=0."""
    if mu <= 0:
        raise DomainError("mu must be positive")
    k = np.asarray(k, dtype=float)
    xi = np.asarray(xi, dtype=float)
    absk = np.abs(k)
    safe = np.where(absk > 0, absk, 1.0)
    arg = mu ** (1.0 / 3.0) * safe ** (-1.0 / 3.0) * np.sign(k) * xi
    out = np.where(absk > 0, phi(arg), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MultiplierTable:
    """Symbols of M1, M2, M, M_k and k*dxi(M) over a (k, xi) lattice.

    ``xi`` is the unsheared dual variable; callers evaluating at time t
    pass xi = eta - k*t.  Immutable after construction.
    """

    lattice: FrequencyLattice
    nu: float
    xi: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    m: np.ndarray
    m_vertical: np.ndarray
    k_dxi_m: np.ndarray


def build_table(lattice: FrequencyLattice, nu: float, t: float = 0.0,
                mu: float | None = None) -> MultiplierTable:
    """Evaluate all multiplier symbols at xi = eta - k*t on the lattice."""
    if mu is None:
        mu = nu
    k = lattice.k.astype(float)
    xi = lattice.xi(t)
    m1 = m1_symbol(k, xi, nu)
    m2 = m2_symbol(k, xi)
    m = 1.0 + m1 + m2
    mv = m_vertical_symbol(k, xi, mu)
    kdm = np.zeros_like(xi)
    kk = np.broadcast_to(k, xi.shape)
    nz = kk != 0
    kdm[nz] = k_dxi_m(kk[nz], xi[nz], nu)
    table = MultiplierTable(lattice, nu, xi, m1, m2, m, mv, kdm)
    if not (np.all(table.m >= 1.0) and np.all(table.m <= 2.0 + math.pi)):
        raise VerificationError("multiplier bound 1 <= M <= 2+pi violated")
    return table


def verify_enhanced_bound(table: MultiplierTable) -> dict:
    """Check both enhanced-dissipation lower bounds at every k != 0 point.

    Inequality A:  nu*xi^2 + k*dxi(M1)          >= (1/4) nu^(1/3) |k|^(2/3)
    Inequality B:  2*nu*xi^2*M + k*dxi(M)       >= nu*xi^2
                                                 + (1/4) nu^(1/3) |k|^(2/3)
                                                 + 1/(xi^2 + k^2)

    Returns a report dict with per-k minimum slacks; raises
    VerificationError on any negative slack.
    """
    lat = table.lattice
    nu = table.nu
    k = np.broadcast_to(lat.k.astype(float), table.xi.shape)
    xi = table.xi
    nz = k != 0
    absk = np.abs(k)

    # On the phi' plateau the slack of inequality A is exactly zero; build
    # both sides from the same factored primitives so it stays bitwise zero
    # instead of picking up cancellation noise.
    safek = np.where(nz, absk, 1.0)
    base = nu ** (1.0 / 3.0) * safek ** (2.0 / 3.0)
    s_arg = nu ** (1.0 / 3.0) * safek ** (-1.0 / 3.0) * np.sign(k) * xi
    kdm1 = base * phi_prime(s_arg)
    invd = 1.0 / np.where(nz, k ** 2 + xi ** 2, 1.0)
    enhan = 0.25 * base
    slack_a = nu * xi ** 2 + kdm1 - enhan
    slack_b = 2.0 * nu * xi ** 2 * table.m + (kdm1 + invd) \
        - (nu * xi ** 2 + enhan + invd)

    per_k = []
    for kval in range(-lat.Kmax, lat.Kmax + 1):
        row = k == kval
        if kval == 0:
            per_k.append({"k": 0, "applicable": False})
            continue
        sa = float(slack_a[row].min())
        sb = float(slack_b[row].min())
        per_k.append({"k": kval, "applicable": True,
                      "min_slack_m1": sa, "min_slack_full": sb})
    worst_a = min(e["min_slack_m1"] for e in per_k if e["applicable"])
    worst_b = min(e["min_slack_full"] for e in per_k if e["applicable"])
    report = {
        "nu": nu,
        "m_min": float(table.m.min()),
        "m_max": float(table.m.max()),
        "m_bounds_ok": bool(np.all(table.m >= 1.0) and np.all(table.m <= 2.0 + math.pi)),
        "min_slack_m1": worst_a,
        "min_slack_full": worst_b,
        "per_k": per_k,
        "passed": bool(worst_a >= 0.0 and worst_b >= 0.0),
    }
    if not report["passed"]:
        offenders = [(e["k"],) for e in per_k if e["applicable"]
                     and (e["min_slack_m1"] < 0 or e["min_slack_full"] < 0)]
        raise VerificationError(f"enhanced-dissipation bound violated at k in {offenders}")
    return report
