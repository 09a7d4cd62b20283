"""Lattice, transform and multiplier-operator behavior."""

import math
import os
import re

import numpy as np
import pytest

from cbsq.errors import DomainError, LatticeMismatchError
from cbsq.spectral import (FrequencyLattice, PhysicsParams, SpectralField,
                           biot_savart, dealiased_product, enforce_reality,
                           fractional_dx, from_grid, lambda_shear_weight,
                           linf_norm, project_nonzero, project_zero,
                           random_real_field, sobolev_embedding_constant,
                           to_grid, weighted_inner, weighted_l2_norm,
                           zero_field)

DOCS = os.path.join(os.path.dirname(__file__), "..", "docs", "normalization.md")


@pytest.fixture
def lat():
    return FrequencyLattice(8, 24, 16.0 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_lattice_shapes(lat):
    assert lat.Nx == 17 and lat.Ny == 49
    assert lat.k.shape == (17, 1) and lat.j.shape == (1, 49)
    assert int(lat.k.max()) == 8 and int(lat.k.min()) == -8
    assert lat.eta_spacing == pytest.approx(2.0 * math.pi / lat.Ly)
    assert lat.cell_measure == pytest.approx(2.0 * math.pi * lat.Ly)
    # 2/3 rule on odd sizes: products of retained modes are alias-free
    assert lat.dealias_kc == math.ceil(17 / 3) - 1 == 5
    assert 2 * lat.dealias_kc <= lat.Kmax + (lat.Nx - 1 - lat.Kmax)


def test_lattice_validation():
    with pytest.raises(DomainError):
        FrequencyLattice(0, 4, 1.0)
    with pytest.raises(DomainError):
        FrequencyLattice(4, 4, -1.0)


def test_xi_shift(lat):
    xi = lat.xi(2.0)
    assert xi.shape == (lat.Nx, lat.Ny)
    # mode (k, j) = (3, 5): xi = eta - k*t
    assert xi[3, 5] == pytest.approx(5 * lat.eta_spacing - 3 * 2.0)


def test_norm_trivial_values(lat):
    assert weighted_l2_norm(zero_field(lat)) == 0.0
    c = np.zeros((lat.Nx, lat.Ny), dtype=complex)
    c[2, 3] = 1.0
    f = SpectralField(lat, c)
    assert weighted_l2_norm(f) == pytest.approx(math.sqrt(lat.cell_measure), rel=1e-14)


def test_norm_single_mode_b2_weight():
    # eta_spacing = 1 so the (1,1) mode carries weight (1+1+1) = 3 at b=2
    lat = FrequencyLattice(4, 4, 2.0 * math.pi)
    c = np.zeros((lat.Nx, lat.Ny), dtype=complex)
    c[1, 1] = 1.0
    f = SpectralField(lat, c)
    w = lambda_shear_weight(lat, 0.0, 2.0)  # symbol value 3 at (1,1)
    assert weighted_l2_norm(f, w) == pytest.approx(
        math.sqrt(3.0) * weighted_l2_norm(f), rel=1e-14)


def test_plancherel_grid_consistency(lat, rng):
    f = random_real_field(lat, rng)
    g = to_grid(f)
    grid_sq = np.sum(np.abs(g) ** 2) * lat.dz_spacing * lat.dy_spacing
    assert math.sqrt(grid_sq) == pytest.approx(weighted_l2_norm(f), rel=1e-12)


def test_transform_roundtrip(lat, rng):
    f = random_real_field(lat, rng)
    back = from_grid(lat, to_grid(f), f.time)
    assert np.abs(back.coeffs - f.coeffs).max() < 1e-13


def test_reality_preserved_by_operations(lat, rng):
    f = random_real_field(lat, rng, kband=5, jband=15)
    assert f.reality_defect() < 1e-15
    assert np.abs(to_grid(f).imag).max() < 1e-12
    for g in (fractional_dx(f, 1.0 / 3.0), project_zero(f), project_nonzero(f),
              dealiased_product(f, f), *biot_savart(f, 0.7)):
        assert g.reality_defect() < 1e-12


def test_projections_partition(lat, rng):
    f = random_real_field(lat, rng)
    pz, pnz = project_zero(f), project_nonzero(f)
    assert np.array_equal(pz.coeffs + pnz.coeffs, f.coeffs)
    assert np.array_equal(project_zero(pz).coeffs, pz.coeffs)
    assert np.array_equal(project_nonzero(pnz).coeffs, pnz.coeffs)
    assert np.all(pnz.coeffs[0, :] == 0)


def test_biot_savart_divergence_free(lat, rng):
    f = random_real_field(lat, rng)
    for t in (0.0, 1.3):
        u, v = biot_savart(f, t)
        xi = lat.xi(t)
        div = 1j * lat.k * u.coeffs + 1j * xi * v.coeffs
        assert np.abs(div).max() < 1e-12 * np.abs(f.coeffs).max()


def test_biot_savart_single_mode(lat):
    c = np.zeros((lat.Nx, lat.Ny), dtype=complex)
    c[2, 3] = 1.0
    w = SpectralField(lat, c)
    u, v = biot_savart(w, 0.0)
    eta = 3 * lat.eta_spacing
    denom = 4.0 + eta ** 2
    assert u.coeffs[2, 3] == pytest.approx(1j * eta / denom)
    assert v.coeffs[2, 3] == pytest.approx(-1j * 2.0 / denom)


def test_biot_savart_rejects_mean(lat):
    c = np.zeros((lat.Nx, lat.Ny), dtype=complex)
    c[0, 0] = 1.0
    with pytest.raises(DomainError):
        biot_savart(SpectralField(lat, c), 0.0)


def _dense_convolution(lat, a, b):
    """O(N^4) reference convolution on integer index pairs."""
    Nx, Ny = lat.Nx, lat.Ny
    out = np.zeros((Nx, Ny), dtype=complex)
    kv = lat.k[:, 0]
    jv = lat.j[0, :]
    for i1 in range(Nx):
        for j1 in range(Ny):
            if a[i1, j1] == 0:
                continue
            for i2 in range(Nx):
                for j2 in range(Ny):
                    if b[i2, j2] == 0:
                        continue
                    ks = kv[i1] + kv[i2]
                    js = jv[j1] + jv[j2]
                    if abs(ks) <= lat.Kmax and abs(js) <= lat.Jmax:
                        out[ks % Nx, js % Ny] += a[i1, j1] * b[i2, j2]
    return out


def test_dealiased_product_matches_dense_convolution(rng):
    lat = FrequencyLattice(5, 5, 4.0)
    f = random_real_field(lat, rng, kband=lat.dealias_kc, jband=lat.dealias_jc)
    g = random_real_field(lat, rng, kband=lat.dealias_kc, jband=lat.dealias_jc)
    got = dealiased_product(f, g).coeffs
    want = _dense_convolution(lat, f.coeffs, g.coeffs)
    want = np.where(lat.dealias_mask, want, 0.0)
    assert np.abs(got - want).max() < 1e-13 * max(1.0, np.abs(want).max())


def test_product_time_mismatch(lat, rng):
    f = random_real_field(lat, rng)
    g = random_real_field(lat, rng, time=1.0)
    with pytest.raises(LatticeMismatchError):
        dealiased_product(f, g)


def test_fractional_dx_symbol(lat, rng):
    f = random_real_field(lat, rng)
    g = fractional_dx(f, 1.0 / 3.0)
    assert g.coeffs[4, 7] == pytest.approx(4.0 ** (1.0 / 3.0) * f.coeffs[4, 7])
    assert np.all(g.coeffs[0, :] == 0.0)  # |k|^gamma vanishes on the k=0 row
    assert np.array_equal(fractional_dx(f, 0.0).coeffs, f.coeffs)
    with pytest.raises(DomainError):
        fractional_dx(f, -1.0)  # k=0 content present
    h = fractional_dx(project_nonzero(f), -1.0)
    assert h.coeffs[2, 1] == pytest.approx(0.5 * f.coeffs[2, 1])


def test_linf_embedding(lat, rng):
    b = 1.5
    f = random_real_field(lat, rng)
    C = sobolev_embedding_constant(lat, b)
    lam2 = lambda_shear_weight(lat, 0.0, b) ** 2
    assert linf_norm(f) <= C * weighted_l2_norm(f, lam2) * (1 + 1e-12)


def test_product_inequality(lat, rng):
    # inner-third supports, so the product is exactly representable
    b = 1.5
    lam2 = lambda_shear_weight(lat, 0.0, b) ** 2
    for trial in range(5):
        f = random_real_field(lat, rng, kband=lat.Kmax // 3, jband=lat.Jmax // 3)
        g = random_real_field(lat, rng, kband=lat.Kmax // 3, jband=lat.Jmax // 3)
        lhs = weighted_l2_norm(dealiased_product(f, g), lam2)
        rhs = linf_norm(f) * weighted_l2_norm(g, lam2) \
            + linf_norm(g) * weighted_l2_norm(f, lam2)
        assert lhs <= rhs * (1 + 1e-12)


def test_weighted_inner_consistency(lat, rng):
    f = random_real_field(lat, rng)
    assert weighted_inner(f, f) == pytest.approx(weighted_l2_norm(f) ** 2, rel=1e-12)
    with pytest.raises(DomainError):
        weighted_l2_norm(f, -1.0)


def test_enforce_reality_idempotent(lat, rng):
    c = rng.standard_normal((lat.Nx, lat.Ny)) + 1j * rng.standard_normal((lat.Nx, lat.Ny))
    f = enforce_reality(SpectralField(lat, c))
    assert f.reality_defect() < 1e-14
    again = enforce_reality(f)
    assert np.abs(again.coeffs - f.coeffs).max() < 1e-15


def test_index_violations():
    ok = PhysicsParams(nu=1e-3, mu=1e-3, sigma=0, b=1.5,
                       beta=2.0 / 3.0, alpha=4.0 / 3.0, delta=1.0)
    assert ok.index_violations() == []
    bad = PhysicsParams(nu=1e-3, mu=1e-3, sigma=0, b=1.2,
                        beta=0.5, alpha=0.5, delta=0.5)
    msgs = bad.index_violations()
    assert len(msgs) == 4
    full = PhysicsParams(nu=1e-3, mu=1e-3, sigma=1, b=1.1,
                         beta=0.5, alpha=1.0, delta=5.0 / 6.0)
    assert full.index_violations() == []


def test_normalization_document(lat):
    with open(DOCS) as fh:
        text = fh.read()
    rows = dict(re.findall(r"^\|\s*(\w+)\s*\|\s*([^|]+?)\s*\|", text, re.M))
    env = {"pi": math.pi, "Ly": lat.Ly, "Nx": lat.Nx, "Ny": lat.Ny,
           "sqrt": math.sqrt}
    assert eval(rows["cell_measure"], env) == pytest.approx(lat.cell_measure)
    assert eval(rows["single_mode_l2"], env) == pytest.approx(math.sqrt(lat.cell_measure))
    assert eval(rows["to_grid_scale"], env) == lat.Nx * lat.Ny
    assert eval(rows["from_grid_scale"], env) == pytest.approx(1.0 / (lat.Nx * lat.Ny))
    assert eval(rows["eta_spacing"], env) == pytest.approx(lat.eta_spacing)
