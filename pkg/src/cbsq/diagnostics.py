"""Norm bundles, decay-rate fitting, scaling regressions and threshold sweeps.

All norms are diagonal weights in the sheared frame:

    Lambda_t^b      -> (1 + k^2 + eta^2)^(b/2)
    D_y             -> |eta - k t|
    |D_x|^gamma     -> |k|^gamma
    (-Lap)^(-1/2)   -> (k^2 + (eta - k t)^2)^(-1/2) on k != 0
    sqrt(M)         -> evaluated at xi = eta - k t

L2-in-time integrals are accumulated by the trapezoid rule at report
cadence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .multiplier import k_dxi_m, m_symbol
from .spectral import SpectralField, lambda_shear_weight, weighted_l2_norm

ENERGY_CSV_COLUMNS = [
    "t",
    "omega_lambda_b", "omega_dy_lambda_b", "omega_dx13_lambda_b",
    "omega_neg_lap_half_neq", "omega_sqrtm_lambda_b",
    "theta_lambda_b", "theta_dy_lambda_b", "theta_dx13_lambda_b",
    "theta_dx23_lambda_b", "theta_neg_lap_half_neq", "theta_sqrtm_lambda_b",
]

DECAY_CSV_COLUMNS = ["k", "nu", "t_efold", "fit_quality", "valid"]

THRESHOLD_CSV_COLUMNS = ["nu", "beta_test", "classification", "max_ratio", "reason"]


@dataclass
class EnergyReport:
    """Instantaneous norm bundle for one (omega, theta) snapshot."""

    t: float
    omega_lambda_b: float
    omega_dy_lambda_b: float
    omega_dx13_lambda_b: float
    omega_neg_lap_half_neq: float
    omega_sqrtm_lambda_b: float
    theta_lambda_b: float
    theta_dy_lambda_b: float
    theta_dx13_lambda_b: float
    theta_dx23_lambda_b: float
    theta_neg_lap_half_neq: float
    theta_sqrtm_lambda_b: float

    def row(self):
        return [getattr(self, c) for c in ENERGY_CSV_COLUMNS]


def _field_norms(f: SpectralField, b: float, nu: float):
    lat = f.lattice
    t = f.time
    lam2 = lambda_shear_weight(lat, t, b) ** 2
    xi = lat.xi(t)
    absk = np.abs(lat.k).astype(float)
    dy2 = xi ** 2
    dx13_2 = np.where(absk > 0, absk ** (2.0 / 3.0), 0.0)
    dx23_2 = np.where(absk > 0, absk ** (4.0 / 3.0), 0.0)
    denom = absk ** 2 + xi ** 2
    neg_lap = np.where(absk > 0, 1.0 / np.where(absk > 0, denom, 1.0), 0.0)
    m = m_symbol(np.broadcast_to(lat.k, xi.shape).astype(float), xi, nu)
    return {
        "lambda_b": weighted_l2_norm(f, lam2),
        "dy_lambda_b": weighted_l2_norm(f, dy2 * lam2),
        "dx13_lambda_b": weighted_l2_norm(f, dx13_2 * lam2),
        "dx23_lambda_b": weighted_l2_norm(f, dx23_2 * lam2),
        "neg_lap_half_neq": weighted_l2_norm(f, neg_lap * lam2),
        "sqrtm_lambda_b": weighted_l2_norm(f, m * lam2),
    }


def energy_report(state) -> EnergyReport:
    """Norm bundle for a SimState or LinearState."""
    p = state.params
    ow = _field_norms(state.omega, p.b, p.nu)
    th = _field_norms(state.theta, p.b, p.nu)
    return EnergyReport(
        t=state.t,
        omega_lambda_b=ow["lambda_b"],
        omega_dy_lambda_b=ow["dy_lambda_b"],
        omega_dx13_lambda_b=ow["dx13_lambda_b"],
        omega_neg_lap_half_neq=ow["neg_lap_half_neq"],
        omega_sqrtm_lambda_b=ow["sqrtm_lambda_b"],
        theta_lambda_b=th["lambda_b"],
        theta_dy_lambda_b=th["dy_lambda_b"],
        theta_dx13_lambda_b=th["dx13_lambda_b"],
        theta_dx23_lambda_b=th["dx23_lambda_b"],
        theta_neg_lap_half_neq=th["neg_lap_half_neq"],
        theta_sqrtm_lambda_b=th["sqrtm_lambda_b"],
    )


def balance_terms(state) -> dict:
    """Terms of the linear energy balance for theta at the state's time.

    Returns the squared sqrt(M)-weighted norm E, the dissipation rate
    D = 2*nu*(||D_y sqrt(M) Lambda^b theta||^2 + sigma ||D_x ...||^2) and
    the commutator pairing P = <(k dxi M) Lambda^b theta, Lambda^b theta>;
    along exact linear trajectories dE/dt + D + P = 0.
    """
    p = state.params
    f = state.theta
    lat = f.lattice
    t = f.time
    lam2 = lambda_shear_weight(lat, t, p.b) ** 2
    xi = lat.xi(t)
    kk = np.broadcast_to(lat.k, xi.shape).astype(float)
    m = m_symbol(kk, xi, p.nu)
    kdm = np.zeros_like(xi)
    nz = kk != 0
    kdm[nz] = k_dxi_m(kk[nz], xi[nz], p.nu)
    E = weighted_l2_norm(f, m * lam2) ** 2
    D = 2.0 * p.mu * weighted_l2_norm(f, (xi ** 2 + p.sigma * kk ** 2) * m * lam2) ** 2
    P = weighted_l2_norm(f, np.maximum(kdm, 0.0) * lam2) ** 2  # kdm >= 0 pointwise
    return {"E": E, "D": D, "P": P}


@dataclass
class DecayFit:
    """First 1/e-crossing time of a per-mode norm series."""

    k: int
    nu: float
    t_efold: float
    fit_quality: float
    valid: bool


def fit_efold(times, values, k: int = 0, nu: float = 0.0) -> DecayFit:
    """Locate the first crossing below exp(-1) of the initial value.

    Interpolation is linear in log-amplitude between samples; fit_quality
    is the worst violation of a monotone decay envelope, relative to the
    initial value.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values[0] <= 0:
        raise ConfigError("series must start positive")
    target = values[0] / math.e
    running = np.minimum.accumulate(values)
    quality = float(np.max(values - running) / values[0])
    below = np.nonzero(values <= target)[0]
    if below.size == 0:
        return DecayFit(k, nu, math.nan, quality, False)
    i = int(below[0])
    if i == 0:
        return DecayFit(k, nu, float(times[0]), quality, True)
    v0, v1 = values[i - 1], values[i]
    if v1 <= 0:
        frac = 1.0
    else:
        frac = (math.log(v0) - math.log(target)) / (math.log(v0) - math.log(v1))
    t_star = float(times[i - 1] + frac * (times[i] - times[i - 1]))
    return DecayFit(k, nu, t_star, quality, True)


def scaling_regression(fits) -> tuple[float, float, float]:
    """Least squares of log t_efold = c0 - p_nu*log(nu) - q_k*log(k).

    Needs at least 3 distinct nu and 3 distinct k values among valid fits.
    Returns (p_nu, q_k, r2).
    """
    fits = [f for f in fits if f.valid]
    nus = sorted({f.nu for f in fits})
    ks = sorted({abs(f.k) for f in fits})
    if len(nus) < 3 or len(ks) < 3:
        raise ConfigError("need >= 3 distinct nu and k values")
    y = np.array([math.log(f.t_efold) for f in fits])
    A = np.column_stack([
        np.ones(len(fits)),
        [-math.log(f.nu) for f in fits],
        [-math.log(abs(f.k)) for f in fits],
    ])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[1]), float(coef[2]), r2


@dataclass
class ThresholdCell:
    nu: float
    beta_test: float
    classification: str  # stable | marginal | escaped
    max_ratio: float
    reason: str = ""


@dataclass
class ThresholdTable:
    growth_factor: float
    cells: list = field(default_factory=list)

    def rows(self):
        return [[c.nu, c.beta_test, c.classification, c.max_ratio, c.reason]
                for c in self.cells]


def cell_seed(base_seed: int, i_nu: int, j_beta: int):
    """Counter-based per-cell seed: SeedSequence(entropy=[base, i, j])."""
    return np.random.SeedSequence(entropy=[int(base_seed), int(i_nu), int(j_beta)])


def sweep_cell(lattice, base_params, stepper_cfg, nu: float, beta: float,
               horizon_efolds: float, seed: int, i_nu: int, j_beta: int,
               epsilon: float, growth_factor: float) -> ThresholdCell:
    """Run and classify one (nu, beta_test) sweep cell.

    Initial data: ||omega0||_{H^b} = epsilon*nu^beta_test, theta targets
    via delta = beta + 1/3 and alpha = delta - beta + 2/3.  Simulated to
    horizon_efolds*nu^(-1/3) and classified by the witnessed max of
    ||Lambda_t^b omega|| / (epsilon*nu^beta_test) against growth_factor.
    """
    from dataclasses import replace as dc_replace

    from .errors import ConfinementError, SolverAbort
    from .solver import make_initial_data, simulate

    delta = beta + 1.0 / 3.0
    alpha = delta - beta + 2.0 / 3.0
    params = dc_replace(base_params, nu=nu, mu=nu, beta=beta,
                        alpha=alpha, delta=delta)
    w_target = epsilon * nu ** beta
    t_target = epsilon * nu ** alpha
    d_target = epsilon * nu ** delta
    state = make_initial_data(
        lattice, params, cell_seed(seed, i_nu, j_beta), w_target, t_target,
        theta_dx13=_feasible_dx13(lattice, params.b, t_target, d_target))
    if w_target == 0:
        return ThresholdCell(nu, beta, "stable", 0.0)
    t_end = horizon_efolds * nu ** (-1.0 / 3.0)
    try:
        reports, _ = simulate(state, stepper_cfg, t_end,
                              report_every=max(t_end / 200.0, 1e-3))
    except (ConfinementError, SolverAbort) as exc:
        return ThresholdCell(nu, beta, "escaped", math.inf, reason=str(exc))
    peak = max(r.omega_lambda_b for r in reports)
    ratio = peak / w_target
    if ratio > growth_factor:
        cls = "escaped"
    elif ratio > 0.8 * growth_factor:
        cls = "marginal"
    else:
        cls = "stable"
    return ThresholdCell(nu, beta, cls, ratio)


def threshold_sweep(lattice, base_params, stepper_cfg, beta_grid, nu_grid,
                    horizon_efolds: float, seed: int, epsilon: float = 0.05,
                    growth_factor: float = 4.0, jobs: int = 1) -> ThresholdTable:
    """Classify stability over a (nu, beta_test) grid; see ``sweep_cell``.

    Cells are independent (per-cell counter-based seeds) and may run in
    parallel; the assembled table order is deterministic regardless.
    """
    if len(beta_grid) == 0 or len(nu_grid) == 0:
        raise ConfigError("sweep grids must be non-empty")
    if horizon_efolds < 1:
        raise ConfigError("horizon_efolds must be >= 1")

    coords = [(i, nu, j, beta) for i, nu in enumerate(nu_grid)
              for j, beta in enumerate(beta_grid)]
    table = ThresholdTable(growth_factor)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(sweep_cell, lattice, base_params, stepper_cfg,
                                   nu, beta, horizon_efolds, seed, i, j,
                                   epsilon, growth_factor)
                       for i, nu, j, beta in coords]
            table.cells = [f.result() for f in futures]
    else:
        table.cells = [sweep_cell(lattice, base_params, stepper_cfg, nu, beta,
                                  horizon_efolds, seed, i, j, epsilon,
                                  growth_factor)
                       for i, nu, j, beta in coords]
    return table


def _feasible_dx13(lattice, b, hb_norm, dx13_norm):
    """Exact joint theta targets when attainable, else None (cap applies).

    The theorem hypotheses are upper bounds; when the requested
    |D_x|^(1/3) target exceeds what the band-limited lattice can carry at
    the given H^b norm, the constraint is slack automatically and the
    two-parameter fit is skipped.
    """
    if dx13_norm is None or hb_norm <= 0:
        return None
    kband = max(1, lattice.Kmax // 3)
    if dx13_norm >= 0.95 * kband ** (1.0 / 3.0) * hb_norm:
        return None
    return dx13_norm
