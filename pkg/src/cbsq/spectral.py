"""Grids, transforms and Fourier-multiplier operators.

All fields live in the sheared frame z = x - t*y with dual variables
(k, eta), eta = xi + k*t.  The horizontal period is 2*pi (integer k) and
the vertical line is periodized to a box of length Ly, so
eta in (2*pi/Ly)*Z.  Grids are odd-sized in both directions, which gives
an unambiguous conjugate pairing (no unpaired Nyquist mode).

Normalization convention (see docs/normalization.md):

    f(z, y) = sum_{k,eta} c(k,eta) exp(i(k z + eta y))
    ||f||_{L^2}^2 = (2*pi*Ly) * sum |c|^2

i.e. coefficients are Fourier-series coefficients and the discrete
Plancherel measure per mode is 2*pi*Ly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, LatticeMismatchError


@dataclass(frozen=True)
class FrequencyLattice:
    """Truncated Fourier lattice for the periodized domain.

    Kmax: largest horizontal wavenumber, k in {-Kmax..Kmax}.
    Jmax: largest vertical mode index, eta in (2*pi/Ly)*{-Jmax..Jmax}.
    Ly:   vertical box length used to periodize the real line.
    """

    Kmax: int
    Jmax: int
    Ly: float

    def __post_init__(self):
        if self.Kmax < 1 or self.Jmax < 1:
            raise DomainError("Kmax and Jmax must be >= 1")
        if not self.Ly > 0:
            raise DomainError("Ly must be positive")

    @property
    def Nx(self) -> int:
        return 2 * self.Kmax + 1

    @property
    def Ny(self) -> int:
        return 2 * self.Jmax + 1

    @property
    def dy_spacing(self) -> float:
        return self.Ly / self.Ny

    @property
    def dz_spacing(self) -> float:
        return 2.0 * math.pi / self.Nx

    @property
    def eta_spacing(self) -> float:
        return 2.0 * math.pi / self.Ly

    @property
    def cell_measure(self) -> float:
        """Plancherel measure per lattice mode."""
        return 2.0 * math.pi * self.Ly

    @property
    def k(self) -> np.ndarray:
        """Integer horizontal wavenumbers, FFT order, shape (Nx, 1)."""
        return np.fft.fftfreq(self.Nx, d=1.0 / self.Nx).round().astype(int)[:, None]

    @property
    def j(self) -> np.ndarray:
        """Integer vertical mode indices, FFT order, shape (1, Ny)."""
        return np.fft.fftfreq(self.Ny, d=1.0 / self.Ny).round().astype(int)[None, :]

    @property
    def eta(self) -> np.ndarray:
        """Vertical frequencies eta, FFT order, shape (1, Ny)."""
        return self.j * self.eta_spacing

    @property
    def dealias_kc(self) -> int:
        """Largest |k| kept by the 2/3 rule (alias-free products)."""
        return math.ceil(self.Nx / 3) - 1

    @property
    def dealias_jc(self) -> int:
        """Largest vertical index kept by the 2/3 rule."""
        return math.ceil(self.Ny / 3) - 1

    @property
    def dealias_mask(self) -> np.ndarray:
        return (np.abs(self.k) <= self.dealias_kc) & (np.abs(self.j) <= self.dealias_jc)

    def xi(self, t: float) -> np.ndarray:
        """Unsheared vertical frequency xi = eta - k*t, shape (Nx, Ny)."""
        return self.eta - self.k * t


@dataclass(frozen=True)
class PhysicsParams:
    """Dissipation coefficients, dissipation mode and threshold exponents.

    sigma=1 is full dissipation, sigma=0 vertical-only.  The threshold
    exponents (beta, alpha, delta) and the Sobolev index b parametrize the
    initial-data smallness conditions; ``index_violations`` lists which of
    the applicable conditions fail.
    """

    nu: float
    mu: float
    sigma: int = 0
    b: float = 1.5
    beta: float = 2.0 / 3.0
    alpha: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if self.sigma not in (0, 1):
            raise DomainError("sigma must be 0 or 1")
        if self.nu < 0 or self.mu < 0:
            raise DomainError("nu and mu must be nonnegative")

    def index_violations(self) -> list[str]:
        bad = []
        if self.sigma == 0:
            if not self.b > 4.0 / 3.0:
                bad.append(f"b={self.b} must be > 4/3 for vertical-only dissipation")
            if not self.beta >= 2.0 / 3.0 - 1e-12:
                bad.append(f"beta={self.beta} must be >= 2/3 for vertical-only dissipation")
        else:
            if not self.b > 1.0:
                bad.append(f"b={self.b} must be > 1 for full dissipation")
            if not self.beta >= 0.5 - 1e-12:
                bad.append(f"beta={self.beta} must be >= 1/2 for full dissipation")
        if not self.delta >= self.beta + 1.0 / 3.0 - 1e-12:
            bad.append(f"delta={self.delta} must be >= beta + 1/3")
        if not self.alpha >= self.delta - self.beta + 2.0 / 3.0 - 1e-12:
            bad.append(f"alpha={self.alpha} must be >= delta - beta + 2/3")
        return bad


def _negate_indices(c: np.ndarray) -> np.ndarray:
    """Map c[i, j] -> c[-i mod N, -j mod M] (odd sizes assumed)."""
    return np.roll(c[::-1, ::-1], (1, 1), axis=(0, 1))


@dataclass
class SpectralField:
    """Complex coefficient array over a FrequencyLattice, in the sheared frame.

    ``time`` is the physical time the frame refers to; it matters for every
    operator whose unsheared symbol involves xi = eta - k*t.
    Treat instances as immutable: operations return new fields.
    """

    lattice: FrequencyLattice
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        expected = (self.lattice.Nx, self.lattice.Ny)
        if self.coeffs.shape != expected:
            raise LatticeMismatchError(
                f"coefficient shape {self.coeffs.shape} != lattice shape {expected}")
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    def with_coeffs(self, coeffs: np.ndarray, time: float | None = None) -> "SpectralField":
        return SpectralField(self.lattice, coeffs,
                             self.time if time is None else time)

    def copy(self) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs.copy(), self.time)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def reality_defect(self) -> float:
        """Max |c(-k,-eta) - conj(c(k,eta))| over the lattice."""
        return float(np.abs(_negate_indices(self.coeffs) - np.conj(self.coeffs)).max())


def zero_field(lattice: FrequencyLattice, time: float = 0.0) -> SpectralField:
    return SpectralField(lattice, np.zeros((lattice.Nx, lattice.Ny), dtype=np.complex128), time)


def enforce_reality(field: SpectralField) -> SpectralField:
    """Project onto the reality-symmetric subspace by conjugate averaging."""
    c = 0.5 * (field.coeffs + np.conj(_negate_indices(field.coeffs)))
    return field.with_coeffs(c)


def to_grid(field: SpectralField) -> np.ndarray:
    """Collocation values on the (Nx, Ny) sheared-frame grid."""
    return np.fft.ifft2(field.coeffs) * (field.lattice.Nx * field.lattice.Ny)


def from_grid(lattice: FrequencyLattice, grid: np.ndarray, time: float = 0.0) -> SpectralField:
    c = np.fft.fft2(grid) / (lattice.Nx * lattice.Ny)
    return SpectralField(lattice, c, time)


def random_real_field(lattice: FrequencyLattice, rng: np.random.Generator,
                      time: float = 0.0, kband: int | None = None,
                      jband: int | None = None) -> SpectralField:
    """Reality-symmetric Gaussian field, band-limited, zero mean."""
    c = rng.standard_normal((lattice.Nx, lattice.Ny)) \
        + 1j * rng.standard_normal((lattice.Nx, lattice.Ny))
    if kband is not None:
        c[np.broadcast_to(np.abs(lattice.k) > kband, c.shape)] = 0.0
    if jband is not None:
        c[np.broadcast_to(np.abs(lattice.j) > jband, c.shape)] = 0.0
    c[0, 0] = 0.0
    return enforce_reality(SpectralField(lattice, c, time))


# ---------------------------------------------------------------------------
# Multiplier operators


def lambda_shear_weight(lattice: FrequencyLattice, t: float, b: float) -> np.ndarray:
    """Symbol of the time-dependent elliptic weight, sheared frame.

    In the sheared variables the weight is static: (1 + k^2 + eta^2)^(b/2).
    ``t`` is accepted for frame bookkeeping only; eta = xi + k*t already
    absorbs the time shift.
    """
    del t
    return (1.0 + lattice.k ** 2 + lattice.eta ** 2) ** (b / 2.0)


def fractional_dx(field: SpectralField, gamma: float) -> SpectralField:
    """Horizontal fractional derivative |D_x|^gamma (symbol |k|^gamma)."""
    k = field.lattice.k
    if gamma < 0 and np.any(field.coeffs[0, :] != 0):
        raise DomainError("negative gamma requires zero k=0 content")
    absk = np.abs(k).astype(float)
    if gamma == 0:
        sym = np.ones_like(absk)
    else:
        with np.errstate(divide="ignore"):
            sym = np.where(absk > 0, absk ** gamma, 0.0)
    return field.with_coeffs(field.coeffs * sym)


def project_zero(field: SpectralField) -> SpectralField:
    """Keep only the horizontal zero mode (x-average)."""
    c = np.zeros_like(field.coeffs)
    c[0, :] = field.coeffs[0, :]
    return field.with_coeffs(c)


def project_nonzero(field: SpectralField) -> SpectralField:
    """Zero out the horizontal zero mode."""
    c = field.coeffs.copy()
    c[0, :] = 0.0
    return field.with_coeffs(c)


def biot_savart(omega: SpectralField, t: float | None = None):
    """Velocity (u, v) from vorticity via u = -grad^perp (-Lap)^{-1} omega.

    In the sheared frame with xi = eta - k*t:
        u_hat =  i*xi / (k^2 + xi^2) * W
        v_hat = -i*k  / (k^2 + xi^2) * W
    The (0,0) coefficient of omega must vanish (singular there).
    """
    if t is None:
        t = omega.time
    if omega.coeffs[0, 0] != 0:
        raise DomainError("biot_savart requires zero (0,0) vorticity coefficient")
    lat = omega.lattice
    k = lat.k.astype(float)
    xi = lat.xi(t)
    denom = k ** 2 + xi ** 2
    denom[0, 0] = 1.0  # (0,0) coefficient is zero anyway
    u = omega.with_coeffs(1j * xi / denom * omega.coeffs)
    v = omega.with_coeffs(-1j * k / denom * omega.coeffs)
    return u, v


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Spectral coefficients of the pointwise product f*g, 2/3-dealiased.

    Inputs are truncated to the inner-2/3 band, multiplied on the
    collocation grid, and the result is truncated again so the retained
    coefficients are the exact convolution of the truncated inputs.
    """
    if f.lattice != g.lattice:
        raise LatticeMismatchError("product factors must share a lattice")
    if f.time != g.time:
        raise LatticeMismatchError("product factors must share a time")
    mask = f.lattice.dealias_mask
    ft = f.with_coeffs(np.where(mask, f.coeffs, 0.0))
    gt = g.with_coeffs(np.where(mask, g.coeffs, 0.0))
    prod = to_grid(ft) * to_grid(gt)
    out = from_grid(f.lattice, prod, f.time)
    return out.with_coeffs(np.where(mask, out.coeffs, 0.0))


def weighted_l2_norm(field: SpectralField, weight: np.ndarray | float = 1.0) -> float:
    """sqrt( sum weight*|c|^2 * cell_measure ); unit weight gives the L^2 norm."""
    w = np.asarray(weight, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weight must be finite and nonnegative")
    total = float(np.sum(w * np.abs(field.coeffs) ** 2))
    return math.sqrt(total * field.lattice.cell_measure)


def weighted_inner(field: SpectralField, other: SpectralField,
                   weight: np.ndarray | float = 1.0) -> float:
    """Real weighted L^2 inner product under the same normalization."""
    val = np.sum(np.asarray(weight) * field.coeffs * np.conj(other.coeffs))
    return float(val.real) * field.lattice.cell_measure


def linf_norm(field: SpectralField) -> float:
    """Max collocation value magnitude (grid L-infinity)."""
    return float(np.abs(to_grid(field)).max())


def sobolev_embedding_constant(lattice: FrequencyLattice, b: float) -> float:
    """Discrete constant C with ||f||_Linf <= C ||Lambda^b f||_L2, b > 1.

    C = ( sum (1+k^2+eta^2)^(-b) / cell_measure )^(1/2): Cauchy-Schwarz on
    the Fourier series against the lattice weight.
    """
    w = (1.0 + lattice.k ** 2 + lattice.eta ** 2) ** (-b)
    return math.sqrt(float(np.sum(w)) / lattice.cell_measure)
