"""Spectral-module tests: stencils, kernels, asymptotics, sigma composition,
closed-form optima and the energy-bound constants."""

import math

import numpy as np
import pytest

from gkplab.errors import InvalidParameter, OutOfRegime
from gkplab.geometry import EnergyParams, hexagonal_geometry, square_geometry
from gkplab.spectral import (
    SigmaParams,
    asymptotic_rate,
    build_lsigma_hexa,
    build_tsigma,
    eigen_small_1d,
    eigen_small_2d,
    energy_bound,
    logical_rates_from_spectrum,
    optimal_epsilon,
    tsigma_spectrum,
    write_spectrum_csv,
)


def test_tsigma_stencil_action_on_single_harmonic():
    # T_sigma e^{2 i theta} = 4 sigma e^{2 i theta} + e^{4 i theta} - 1
    sigma, K = 0.1, 20
    t = build_tsigma(sigma, K)
    col = t[:, K + 2]
    nz = {int(i - K): col[i] for i in np.nonzero(col)[0]}
    assert nz == {0: -1.0, 2: pytest.approx(4 * sigma), 4: 1.0}


def test_tsigma_constant_in_kernel():
    t = build_tsigma(0.2, 25)
    e0 = np.zeros(51)
    e0[25] = 1.0
    assert np.abs(t @ e0).max() == 0.0


def test_tsigma_row_zero_couples_to_pm2():
    t = build_tsigma(0.3, 20)
    row = t[20, :]
    nz = {int(j - 20): row[j] for j in np.nonzero(row)[0]}
    assert nz == {-2: -1.0, 2: -1.0}


def test_tsigma_parity_blocks_decouple():
    K = 30
    t = build_tsigma(0.15, K)
    ks = np.arange(2 * K + 1) - K
    even = np.where(ks % 2 == 0)[0]
    odd = np.where(ks % 2 != 0)[0]
    assert np.abs(t[np.ix_(even, odd)]).max() == 0.0
    assert np.abs(t[np.ix_(odd, even)]).max() == 0.0


def test_mu1_matches_asymptotic_formula_small_sigma():
    for sigma in (0.05, 0.074228, 0.1):
        res = tsigma_spectrum(sigma, count=4)
        mu1 = res.nonzero()[0]
        asym = 4.0 / math.pi * math.exp(-1.0 / sigma)
        assert mu1 == pytest.approx(asym, rel=0.15)
    # frozen oracle value from the diagonalization itself at sigma = A*eps*eta/4, eps = 0.1
    res = tsigma_spectrum(0.074228086, count=4)
    assert res.nonzero()[0] == pytest.approx(1.724e-06, rel=1e-3)


def test_mu2_bounded_below_and_large_sigma_regime():
    for sigma in (0.05, 0.1, 0.2):
        res = tsigma_spectrum(sigma, count=4)
        assert res.nonzero()[1] >= 1.0
    res5 = tsigma_spectrum(5.0, count=3, K_max=100)
    assert res5.nonzero()[0] == pytest.approx(5.0, rel=0.10)


def test_eigenfunction_converges_to_sign_cos():
    # overlap in the operator's natural weighted inner product, whose weight
    # e^{-(1-cos 2 theta)/(2 sigma)} concentrates away from the sign kinks
    sigma = 0.05
    res = tsigma_spectrum(sigma, count=3)
    k_max = res.K_max
    vec = res.eigenfunctions[1]
    thetas = np.linspace(-math.pi, math.pi, 4001)
    vals = np.zeros_like(thetas, dtype=complex)
    for i, c in enumerate(vec):
        vals += c * np.exp(1j * (i - k_max) * thetas)
    vals = vals.real
    target = np.sign(np.cos(thetas))
    weight = np.exp(-(1.0 - np.cos(2.0 * thetas)) / (2.0 * sigma))
    overlap = abs((weight * vals) @ target) / math.sqrt(
        (weight * vals**2).sum() * (weight * target**2).sum()
    )
    assert overlap > 0.99


def test_kmax_convergence():
    a = tsigma_spectrum(0.074228, count=3, K_max=100).nonzero()[0]
    b = tsigma_spectrum(0.074228, count=3, K_max=200).nonzero()[0]
    assert abs(a - b) / b < 1e-3


def test_hexagonal_constant_annihilated_and_sparsity():
    K = 20
    op = build_lsigma_hexa(0.15, K)
    size = 2 * K + 1
    e0 = np.zeros(size * size)
    e0[K * size + K] = 1.0
    assert np.abs(op @ e0).max() < 1e-12
    assert (op.getnnz(axis=1) <= 9).all()


def test_hexagonal_triple_degeneracy_and_gap():
    res = eigen_small_2d(build_lsigma_hexa(0.15, 50), count=6)
    lam = res.nonzero()
    assert lam[1] == pytest.approx(lam[0], rel=1e-2)
    assert lam[2] == pytest.approx(lam[0], rel=1e-2)
    asym = 12.0 * math.sqrt(3.0) / math.pi * math.exp(-2.0 / 0.15)
    assert lam[0] == pytest.approx(asym, rel=0.2)
    assert lam[3] >= 1.4


def test_hexagonal_collected_variant_disagrees():
    # the alternative sign collection fails both the degeneracy and the gap,
    # which is how the convention was fixed
    res = eigen_small_2d(build_lsigma_hexa(0.15, 40, variant="collected"), count=6)
    lam = res.nonzero()
    asym = 12.0 * math.sqrt(3.0) / math.pi * math.exp(-2.0 / 0.15)
    assert not lam[0] == pytest.approx(asym, rel=0.5)


def test_sigma_composition_formulas():
    geom = square_geometry()
    ep = EnergyParams.from_epsilon(geom, 0.1)
    sp = SigmaParams.for_code(geom, ep, 0.0)
    base = ep.amp * ep.epsilon * ep.eta
    assert sp.sigma == pytest.approx(base / 4.0, rel=1e-12)
    kog = 0.04
    spn = SigmaParams.for_code(geom, ep, kog)
    assert spn.sigma == pytest.approx(
        base / 4.0 + kog * ep.eta / (8.0 * ep.amp * ep.epsilon), rel=1e-12
    )
    hexg = hexagonal_geometry()
    eph = EnergyParams.from_epsilon(hexg, 0.1)
    sph = SigmaParams.for_code(hexg, eph, kog)
    baseh = eph.amp * eph.epsilon * eph.eta
    assert sph.sigma == pytest.approx(
        3.0 * baseh / 8.0 + kog * eph.eta / (8.0 * eph.amp * eph.epsilon), rel=1e-12
    )


def test_logical_rates_square_ratios():
    geom = square_geometry()
    ep = EnergyParams.from_epsilon(geom, 0.1)
    sp = SigmaParams.for_code(geom, ep, 0.0)
    gx, gy, gz = logical_rates_from_spectrum(sp, 1.0, geom)
    assert gy == pytest.approx(2.0 * gx, rel=1e-12)
    assert gz == gx
    # A*eps*eta = 0.29691 at eps = 0.1 times mu_1(sigma = 0.074228)
    assert gx == pytest.approx(0.29691 * 1.724e-06, rel=2e-3)


def test_logical_rates_hexagonal_equal():
    geom = hexagonal_geometry()
    ep = EnergyParams.from_epsilon(geom, 0.15)
    sp = SigmaParams.for_code(geom, ep, 0.0)
    gx, gy, gz = logical_rates_from_spectrum(sp, 1.0, geom, K_max=60)
    assert gx == gy == gz


def test_optimal_epsilon_closed_forms():
    geom = square_geometry()
    assert optimal_epsilon(2e-2, geom) == pytest.approx(0.1, rel=1e-12)
    hexg = hexagonal_geometry()
    assert optimal_epsilon(3e-2, hexg) == pytest.approx(0.1, rel=1e-12)
    with pytest.raises(OutOfRegime):
        optimal_epsilon(0.7, geom)
    with pytest.raises(OutOfRegime):
        optimal_epsilon(0.0, geom)


def test_spectral_minimum_sits_near_optimal_epsilon():
    geom = square_geometry()
    kog = 2e-2
    eps_star = optimal_epsilon(kog, geom)
    eps_grid = np.linspace(0.5 * eps_star, 2.0 * eps_star, 31)
    rates = []
    for eps in eps_grid:
        ep = EnergyParams.from_epsilon(geom, float(eps))
        sp = SigmaParams.for_code(geom, ep, kog)
        gx, _, _ = logical_rates_from_spectrum(sp, 1.0, geom, K_max=150)
        rates.append(gx)
    eps_min = float(eps_grid[int(np.argmin(rates))])
    assert abs(eps_min - eps_star) <= 0.2 * eps_star


def test_asymptotic_rate_reductions():
    geom = square_geometry()
    ep = EnergyParams.from_epsilon(geom, 0.1)
    sp0 = SigmaParams.for_code(geom, ep, 0.0)
    base = ep.amp * ep.epsilon * ep.eta
    want = 4.0 / math.pi * base * math.exp(-4.0 / base)
    assert asymptotic_rate(sp0, geom) == pytest.approx(want, rel=1e-12)


def test_energy_bound_values_and_guards():
    geom = square_geometry()
    ep = EnergyParams.from_epsilon(geom, 0.1)
    lam, big_c = energy_bound(ep, M=2, gamma=1.0)
    assert lam == pytest.approx(1.418, abs=2e-3)
    assert big_c == pytest.approx(17.72, abs=2e-2)
    ep_half = EnergyParams.from_epsilon(geom, 0.05)
    _, c_half = energy_bound(ep_half, M=2, gamma=1.0)
    assert c_half == pytest.approx(2.0 * big_c, rel=1e-12)
    ep_big = EnergyParams.from_epsilon(geom, 0.25)
    with pytest.raises(OutOfRegime):
        energy_bound(ep_big, M=2, gamma=1.0)


def test_spectrum_csv(tmp_path):
    res = tsigma_spectrum(0.1, count=4)
    path = tmp_path / "spec.csv"
    write_spectrum_csv(0.1, res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "sigma,k,lambda_k"
    assert len(lines) == 5


def test_build_tsigma_validation():
    with pytest.raises(InvalidParameter):
        build_tsigma(-0.1, 50)
    with pytest.raises(InvalidParameter):
        build_tsigma(0.1, 10)
