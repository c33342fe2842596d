"""Regularized eta/zeta pipeline against independently computed oracles."""

import math

import numpy as np
import pytest

from spectral_eta import (
    AsymptoticFit,
    EtaConfig,
    NearPole,
    additivity_check,
    antisymmetry_residual,
    closed_form_tail,
    eigensolve,
    eta_direct,
    finite_part_eta,
    fit_short_time,
    raw_pair,
    reduced_eta,
    relative_eta_function,
    relative_eta_invariant,
    relative_zeta_invariant,
)

EXACT_TOL = 1e-12
ORACLE_TOL = 1e-15
SPLIT_TOL = 1e-10
QUAD_TOL = 1e-6
LS_TOL = 5e-3

# Reference values computed independently with mpmath at 50 digits.
SQRTPI_ERFC_1 = 0.2788055852806619765      # sqrt(pi) * erfc(1)
SQRTPI_ERFC_2 = 0.0082910693806726673632   # sqrt(pi) * erfc(2)
E1_1 = 0.21938393439552027368              # exponential integral E1(1)
E1_4 = 0.0037793524098489064789            # E1(4)
GAMMA_LOG_CONST = 1.1077919038728710232    # (euler_gamma + 2 ln 2) / sqrt(pi)
SQRT_PI = 1.7724538509055160273
TWO_POW_ORACLE = complex(-0.94121611845729725837,
                         -0.021229820318916783999)  # 2**(-(4+0.5j)) - 1


def _gapped_pair(rng, dim, gap=0.08, block_scale=1.5):
    """Invertible Hermitian pair differing on a contiguous block."""
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


# --- closed-form ingredients ----------------------------------------------------


def test_weighted_tail_matches_erfc_oracle():
    assert closed_form_tail(eigensolve(np.diag([2.0])), 1.0, weighted=True) \
        == pytest.approx(SQRTPI_ERFC_2, abs=ORACLE_TOL)
    assert closed_form_tail(eigensolve(np.diag([1.0])), 1.0, weighted=True) \
        == pytest.approx(SQRTPI_ERFC_1, abs=ORACLE_TOL)
    # sign flips with the eigenvalue
    assert closed_form_tail(eigensolve(np.diag([-1.0])), 1.0, weighted=True) \
        == pytest.approx(-SQRTPI_ERFC_1, abs=ORACLE_TOL)


def test_unweighted_tail_matches_exponential_integral():
    assert closed_form_tail(eigensolve(np.diag([1.0])), 1.0, weighted=False) \
        == pytest.approx(E1_1, abs=ORACLE_TOL)
    assert closed_form_tail(eigensolve(np.diag([2.0])), 1.0, weighted=False) \
        == pytest.approx(E1_4, abs=ORACLE_TOL)


def test_eta_direct_rational_point():
    spectrum = eigensolve(np.diag([1.0, 2.0, -3.0]))
    # 1 + 2^-2 - 3^-2 at s = 2
    assert eta_direct(spectrum, 2.0) == pytest.approx(41.0 / 36.0, abs=EXACT_TOL)
    assert eta_direct(spectrum, 0.0) == pytest.approx(1.0, abs=EXACT_TOL)


def test_finite_part_assembly_constants():
    # only the n-slot coefficient set: the value is the gamma/log constant
    coeffs = np.zeros(6)
    coeffs[1] = 1.0
    fit = AsymptoticFit(1, 5, coeffs, 1.0, 0.0, "exact-taylor", True)
    assert finite_part_eta(fit, 0.0, 0.0) == pytest.approx(
        GAMMA_LOG_CONST, abs=ORACLE_TOL)
    # the n-slot couples to log(t_cut): shifting the split adds 2/sqrt(pi)
    fit_e2 = AsymptoticFit(1, 5, coeffs, math.e**2, 0.0, "exact-taylor", True)
    assert finite_part_eta(fit_e2, 0.0, 0.0) == pytest.approx(
        GAMMA_LOG_CONST + 2.0 / SQRT_PI, abs=1e-14)
    # a k = 0 slot integrates to -2 t_cut^(-1/2) / sqrt(pi)
    coeffs0 = np.zeros(6)
    coeffs0[0] = 1.0
    fit0 = AsymptoticFit(1, 5, coeffs0, 4.0, 0.0, "exact-taylor", True)
    assert finite_part_eta(fit0, 0.0, 0.0) == pytest.approx(
        -1.0 / SQRT_PI, abs=ORACLE_TOL)


def test_exact_taylor_ladder_coefficients():
    s0 = eigensolve(np.diag([1.2, -0.7, 3.0]))
    s1 = eigensolve(np.diag([2.1, -0.7, 3.0]))
    # keep radius^2 * t_cut below one so the truncated ladder converges
    fit = fit_short_time((s0, s1), n=1, mode="exact-taylor", t_cut=0.1)
    lam0 = np.array([1.2, -0.7, 3.0])
    lam1 = np.array([2.1, -0.7, 3.0])
    for m in range(4):
        want = (-1.0) ** m / math.factorial(m) * (
            (lam1 ** (2 * m + 1)).sum() - (lam0 ** (2 * m + 1)).sum())
        assert fit.coeffs[2 + 2 * m] == pytest.approx(want, rel=1e-13)
    # every other slot is empty, in particular the n-slot (no residue)
    assert fit.coeffs[1] == 0.0
    assert fit.coeffs[3] == 0.0
    assert fit.residual < 1e-12


# --- the regularized invariant ---------------------------------------------------


def test_eta_invariant_is_signature_difference():
    pair = (np.diag([-1.0, 2.0, 5.0]), np.diag([1.0, 2.0, 5.0]))
    eta = relative_eta_invariant(pair)
    assert eta.finite_part == pytest.approx(2.0, abs=EXACT_TOL)
    assert eta.residue == 0.0
    assert not eta.irregular_at_zero
    assert reduced_eta(eta) == pytest.approx(1.0, abs=EXACT_TOL)


def test_eta_invariant_kernel_correction():
    pair = (np.diag([0.0, -1.0, 2.0]), np.diag([0.5, -1.0, 2.0]))
    eta = relative_eta_invariant(pair)
    assert eta.kernel_dims == (1, 0)
    assert eta.finite_part == pytest.approx(1.0, abs=EXACT_TOL)
    assert reduced_eta(eta) == pytest.approx(0.0, abs=EXACT_TOL)


def test_eta_invariant_split_point_independence():
    rng = np.random.default_rng(21)
    pair = _gapped_pair(rng, 24)
    values = [
        relative_eta_invariant(pair, EtaConfig(t_cut=t)).finite_part
        for t in (0.25, 1.0, 4.0)
    ]
    assert max(values) - min(values) < SPLIT_TOL


def test_tail_quadrature_matches_closed_form():
    rng = np.random.default_rng(22)
    pair = _gapped_pair(rng, 20)
    closed = relative_eta_invariant(pair, EtaConfig(tail_mode="closed-form"))
    quad = relative_eta_invariant(pair, EtaConfig(tail_mode="quadrature"))
    assert quad.finite_part == pytest.approx(closed.finite_part, abs=QUAD_TOL)


def test_least_squares_mode_tracks_exact_mode():
    rng = np.random.default_rng(23)
    pair = _gapped_pair(rng, 28)
    exact = relative_eta_invariant(pair, EtaConfig(fit_mode="exact-taylor"))
    fitted = relative_eta_invariant(pair, EtaConfig(fit_mode="least-squares"))
    assert fitted.finite_part == pytest.approx(exact.finite_part, abs=LS_TOL)
    assert abs(fitted.residue) < 1e-3


# --- the eta function away from s = 0 --------------------------------------------


def test_eta_function_matches_direct_sum():
    pair = (np.diag([1.0, 4.0]), np.diag([2.0, 4.0]))
    value = relative_eta_function(pair, 4.0 + 0.5j)
    assert value.real == pytest.approx(TWO_POW_ORACLE.real, abs=1e-12)
    assert value.imag == pytest.approx(TWO_POW_ORACLE.imag, abs=1e-12)


def test_eta_function_random_pair_against_direct_sums():
    rng = np.random.default_rng(24)
    pair = _gapped_pair(rng, 16)
    s0 = eigensolve(pair.a0.matrix)
    s1 = eigensolve(pair.a1.matrix)
    for s in (0.5, 2.0, 3.0 - 1.0j):
        want = eta_direct(s1, s) - eta_direct(s0, s)
        got = relative_eta_function(pair, s)
        assert abs(got - want) < 1e-8


def test_eta_function_near_pole_guard():
    pair = (np.diag([1.0, 4.0]), np.diag([2.0, 4.0]))
    # genuine pole: the first occupied ladder slot sits at s = -1
    with pytest.raises(NearPole):
        relative_eta_function(pair, -1.0)
    # s = 1 lands on an *empty* slot: no pole, the value is finite
    value = relative_eta_function(pair, 1.0)
    assert abs(value - (0.5 - 1.0)) < 1e-6


# --- zeta, additivity, antisymmetry ----------------------------------------------


def test_zeta_counts_kernel_difference():
    m0 = np.diag([0.0, 0.0, -1.0, 2.0, 3.0])
    m1 = np.diag([0.0, -1.0, 2.0, 3.0, 4.0])
    assert relative_zeta_invariant((m0, m1)) == pytest.approx(1.0, abs=EXACT_TOL)
    same = np.diag([1.0, 2.0, 3.0])
    assert relative_zeta_invariant((same, same)) == pytest.approx(0.0, abs=EXACT_TOL)


def test_additivity_and_antisymmetry():
    rng = np.random.default_rng(25)
    base = rng.normal(size=(18, 18))
    base = base + base.T + 0.3 * np.eye(18)
    bump = np.zeros((18, 18))
    bump[4:9, 4:9] = rng.normal(size=(5, 5))
    bump[4:9, 4:9] += bump[4:9, 4:9].T
    a0, a1, a2 = base, base + bump, base + 2.5 * bump
    s_samples = (0.0, 2.0, 4.0 + 0.5j)
    assert additivity_check(a0, a1, a2, s_samples) < 1e-8
    assert antisymmetry_residual(a0, a1, (2.0, 4.0 + 0.5j)) < 1e-10


def test_config_validation():
    with pytest.raises(ValueError):
        EtaConfig(fit_mode="cubic-spline")
    with pytest.raises(ValueError):
        EtaConfig(t_cut=-1.0)
