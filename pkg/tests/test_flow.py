"""Spectral flow, shift function, decay and variation checks."""

import math

import numpy as np
import pytest

from spectral_eta import (
    EtaConfig,
    Grid,
    NoSignal,
    Potential,
    SupportTooSmall,
    build_dirac_1d,
    build_dirac_2d,
    bump_function,
    decay_check,
    distance_to_origin,
    even_coefficient_check,
    eigensolve,
    gaussian_profile,
    krein_check,
    make_path,
    path_between,
    polynomial_bump,
    raw_pair,
    sf_eta_identity,
    spectral_flow,
    spectral_shift,
    standard_test_functions,
    variation_check,
    variation_coefficient,
)
from spectral_eta.flow import negative_count

EXACT_TOL = 1e-12
KREIN_TOL = 1e-10
IDENTITY_TOL = 1e-8

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _diag_path(lam0, lam1):
    """Path between diagonal matrices differing on the leading entries."""
    return path_between(raw_pair(np.diag(lam0), np.diag(lam1)))


def _gapped_pair(rng, dim, gap=0.05, block_scale=2.5):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    lam, vec = np.linalg.eigh(m + m.conj().T)
    lam = np.sign(lam) * (gap + np.abs(lam))
    m0 = (vec * lam) @ vec.conj().T
    width = max(4, dim // 3)
    while True:
        lo = int(rng.integers(0, dim - width))
        sub = rng.normal(size=(width, width)) + 1j * rng.normal(size=(width, width))
        bump = np.zeros((dim, dim), dtype=complex)
        bump[lo:lo + width, lo:lo + width] = block_scale * 0.5 * (sub + sub.conj().T)
        m1 = m0 + bump
        if np.abs(np.linalg.eigvalsh(m1)).min() >= gap / 2.0:
            return raw_pair(m0, m1)


# --- inertia and flow -------------------------------------------------------------


def test_negative_count_matches_eigensolver():
    rng = np.random.default_rng(31)
    for dim in (5, 12, 33):
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        m = 0.5 * (m + m.conj().T)
        lam = np.linalg.eigvalsh(m)
        assert negative_count(m) == int((lam < 0.0).sum())
        shift = 0.3
        assert negative_count(m, shift) == int((lam < -shift).sum())


def test_spectral_flow_signed_crossings():
    up = _diag_path([-1.0, 2.0, -3.0], [1.0, 2.0, -3.0])
    result = spectral_flow(up)
    assert result.sf == 1
    assert len(result.crossings) == 1
    r_star, sign = result.crossings[0]
    assert sign == 1
    assert r_star == pytest.approx(0.5, abs=1e-6)

    down = _diag_path([1.0, 2.0, -3.0], [-1.0, 2.0, -3.0])
    assert spectral_flow(down).sf == -1

    flat = _diag_path([1.0, 2.0, -3.0], [3.0, 2.0, -3.0])
    result = spectral_flow(flat)
    assert result.sf == 0
    assert result.crossings == []


def test_spectral_flow_double_crossing():
    path = _diag_path([-3.0, -1.0, 5.0, 2.0], [2.0, 4.0, 5.0, 2.0])
    result = spectral_flow(path)
    assert result.sf == 2
    assert sorted(sign for _, sign in result.crossings) == [1, 1]


def test_flow_matches_reduced_eta_on_random_paths():
    from spectral_eta import reduced_eta, relative_eta_invariant

    rng = np.random.default_rng(32)
    seen = set()
    for _ in range(4):
        pair = _gapped_pair(rng, 20)
        xi = reduced_eta(relative_eta_invariant(pair))
        sf = spectral_flow(path_between(pair)).sf
        assert abs(xi - sf) < IDENTITY_TOL
        seen.add(sf)
    assert len(seen) >= 1  # paths are random; at least exercised


# --- shift function and Krein pairing ----------------------------------------------


def test_shift_function_staircase():
    s0 = eigensolve(np.diag([-1.0, 1.0]))
    s1 = eigensolve(np.diag([-2.0, 3.0]))
    shift = spectral_shift((s0, s1))
    assert np.allclose(shift.breakpoints, [-2.0, -1.0, 1.0, 3.0])
    assert shift.values.tolist() == [-1, 0, 1]
    assert shift.near_zero_values() == (0, 0)
    assert shift.value_at(-1.5) == -1
    assert shift.value_at(2.0) == 1


def test_shift_function_kernel_step():
    s0 = eigensolve(np.diag([-1.0, 0.0, 0.0, 2.0]))
    s1 = eigensolve(np.diag([-1.0, 0.4, 0.9, 2.0]))
    shift = spectral_shift((s0, s1))
    left, right = shift.near_zero_values()
    assert (left, right) == (0, 2)  # jump equals the kernel difference


def test_krein_trace_formula_exact():
    rng = np.random.default_rng(33)
    pair = _gapped_pair(rng, 16)
    s0 = eigensolve(pair.a0.matrix)
    s1 = eigensolve(pair.a1.matrix)
    hull = (min(s0.eigenvalues.min(), s1.eigenvalues.min()),
            max(s0.eigenvalues.max(), s1.eigenvalues.max()))
    for phi in standard_test_functions(hull):
        assert krein_check((s0, s1), phi) < KREIN_TOL


def test_krein_direct_polynomial_bump():
    s0 = eigensolve(np.diag([-1.0, 1.0, 4.0]))
    s1 = eigensolve(np.diag([-1.0, 2.0, 4.0]))
    phi = polynomial_bump(1.5, 3.0)
    assert krein_check((s0, s1), phi) < EXACT_TOL
    # a test function missing the hull entirely is rejected, not zeroed
    narrow = bump_function(10.0, 0.5)
    with pytest.raises(SupportTooSmall):
        krein_check((s0, s1), narrow)


# --- long-time decay ----------------------------------------------------------------


def test_decay_rate_from_gap():
    s0 = eigensolve(np.diag([1.0, 3.0]))
    s1 = eigensolve(np.diag([1.2, 3.0]))
    report = decay_check((s0, s1))
    assert report.gap == pytest.approx(1.0)
    assert report.predicted == pytest.approx(0.5)
    # the weighted difference decays like exp(-t): rate ~ gap^2
    assert report.rate == pytest.approx(1.0, rel=0.05)
    assert report.rate >= report.predicted


def test_decay_check_rejects_symmetric_pair():
    s0 = eigensolve(np.diag([-1.0, 1.0]))
    s1 = eigensolve(np.diag([-2.0, 2.0]))
    with pytest.raises(NoSignal):
        decay_check((s0, s1))


# --- variation of the invariant along a path -----------------------------------------


def test_variation_coefficient_vanishes_in_exact_mode():
    rng = np.random.default_rng(34)
    pair = _gapped_pair(rng, 18)
    path = path_between(pair)
    for r in (0.2, 0.7):
        fit = variation_coefficient(path, r)
        assert fit.coeffs[fit.n] == 0.0


def test_variation_identity_on_matrix_path():
    rng = np.random.default_rng(35)
    pair = _gapped_pair(rng, 14, gap=0.15, block_scale=0.6)
    path = path_between(pair)
    assert variation_check(path, r_grid=np.linspace(0.1, 0.9, 5)) < 1e-8


def test_sf_eta_identity_exact():
    rng = np.random.default_rng(36)
    pair = _gapped_pair(rng, 20)
    report = sf_eta_identity(path_between(pair), r_points=5)
    assert report.residual < IDENTITY_TOL
    assert report.variation_integral == pytest.approx(0.0, abs=EXACT_TOL)
    assert report.xi == pytest.approx(report.sf, abs=IDENTITY_TOL)


# --- ladder parity of the derivative-weighted expansion ------------------------------


def _chiral_line_path(n=48, mix=False):
    grid = Grid(1, n, 32.0 / n, "truncated-line", (-16.0,))
    values = np.ones(n)
    if mix:
        x = grid.coordinates()[:, 0]
        off = 0.8 * np.exp(-0.5 * x**2)
        off[np.abs(x) > 3.0] = 0.0
        blocks = (values[:, None, None] * SIGMA3[None, :, :]
                  + off[:, None, None] * SIGMA1[None, :, :])
        base = build_dirac_1d(grid, Potential.from_blocks(blocks))
    else:
        base = build_dirac_1d(grid, values)
    patch = gaussian_profile(grid, -2.5, (-4.0,), 0.8)
    return make_path(base, patch)


def test_one_dimensional_paths_have_no_derivative_signal():
    # central-difference 1D models carry an antiunitary conjugation that
    # flips the operator sign, killing every odd trace exactly -- with or
    # without the off-chiral admixture
    for mix in (False, True):
        with pytest.raises(NoSignal):
            even_coefficient_check(_chiral_line_path(mix=mix), 0.5)


def test_two_dimensional_ladder_is_odd_only():
    grid = Grid(2, 16, 1.0, "periodic", (-7.5, -7.5))
    base = build_dirac_2d(grid, distance_to_origin(grid), scheme="spectral")
    patch = gaussian_profile(grid, -9.0, (1.25, 0.75), 1.8)
    path = make_path(base, patch)
    config = EtaConfig(window_decades=4.0, n_samples=60)
    report = even_coefficient_check(path, 0.35, config=config)
    n = 2
    assert (report.leading_index - (n + 1)) % 2 == 0
    assert report.leading_index >= n + 1
    assert np.all((report.checked_indices % 2) == (n % 2))
    assert report.ratio < 1e-2
