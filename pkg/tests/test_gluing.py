"""Boundary-condition families, gluing and mod-two classification."""

import math

import numpy as np
import pytest

from spectral_eta import (
    Grid,
    InvalidTheta,
    Potential,
    build_aps_halfline,
    build_dirac_1d,
    build_theta_bvp,
    default_theta_grid,
    gaussian_profile,
    gluing_check,
    make_pair,
    mod2z_check,
    raw_pair,
    theta_xi_scan,
)

SPECTRUM_TOL = 1e-10
DEFECT_TOL = 1e-12
SCAN_TOL = 1e-3

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _line_pair(n=64):
    """Line model with an off-chiral admixture away from the cut collar."""
    grid = Grid(1, n, 32.0 / n, "truncated-line", (-16.0,))
    x = grid.coordinates()[:, 0]
    mixing = 0.8 * np.exp(-0.5 * x**2)
    mixing[np.abs(x) > 3.0] = 0.0
    blocks = (np.ones(n)[:, None, None] * SIGMA3[None, :, :]
              + mixing[:, None, None] * SIGMA1[None, :, :])
    base = build_dirac_1d(grid, Potential.from_blocks(blocks))
    patch = gaussian_profile(grid, -2.5, (-4.0,), 0.8)
    return make_pair(base, patch), int(n * 11 // 16)


def test_theta_bvp_validates_angle():
    pair, cut = _line_pair()
    with pytest.raises(InvalidTheta):
        build_theta_bvp(pair.a1, cut, math.pi / 2.0)


def test_theta_bvp_diagnostics():
    pair, cut = _line_pair()
    bvp = build_theta_bvp(pair.a1, cut, 0.3)
    assert bvp.diagnostics["unitarity_defect"] < DEFECT_TOL
    assert bvp.diagnostics["conjugation_defect"] < DEFECT_TOL
    assert bvp.diagnostics["self_adjointness_defect"] < DEFECT_TOL


def test_transmission_angle_recovers_whole_line():
    pair, cut = _line_pair()
    whole = np.sort(np.linalg.eigvalsh(pair.a1.matrix))
    bvp = build_theta_bvp(pair.a1, cut, math.pi / 4.0)
    lam = np.sort(np.linalg.eigvalsh(bvp.operator.matrix))
    assert lam.size == whole.size
    assert np.abs(lam - whole).max() < SPECTRUM_TOL


def test_splitting_angle_decouples_into_aps_halves():
    pair, cut = _line_pair()
    a1 = pair.a1
    bvp = build_theta_bvp(a1, cut, 0.0)
    left = build_aps_halfline(a1, cut, side="left", dual=True)
    right = build_aps_halfline(a1, cut, side="right")
    lam_split = np.sort(np.linalg.eigvalsh(bvp.operator.matrix))
    lam_pieces = np.sort(np.concatenate([
        np.linalg.eigvalsh(left.matrix),
        np.linalg.eigvalsh(right.matrix),
    ]))
    assert lam_split.size == lam_pieces.size
    assert np.abs(lam_split - lam_pieces).max() < SPECTRUM_TOL


def test_theta_scan_is_flat_and_lifts_by_integers():
    pair, cut = _line_pair()
    scan = theta_xi_scan(pair, cut)
    assert scan.sup_variation < SCAN_TOL
    jumps = scan.xi_lifted - scan.xi_raw
    assert np.abs(jumps - np.round(jumps)).max() < SCAN_TOL
    assert scan.thetas.shape == scan.xi_lifted.shape


def test_default_theta_grid_avoids_endpoint_angles():
    grid = default_theta_grid(11)
    assert grid.size == 11
    assert grid.min() > -math.pi / 2.0
    assert grid.max() < math.pi / 2.0


def test_gluing_defect_is_integer():
    pair, cut = _line_pair()
    report = gluing_check(pair, cut)
    assert report.residual < 0.05
    defect = report.xi_relative - report.xi_piece_0 - report.xi_piece_1
    assert abs(defect - round(defect)) < 0.05


def test_mod_two_class_of_random_pairs():
    rng = np.random.default_rng(41)
    for _ in range(3):
        m = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        lam, vec = np.linalg.eigh(m + m.conj().T)
        lam = np.sign(lam) * (0.05 + np.abs(lam))
        m0 = (vec * lam) @ vec.conj().T
        while True:
            sub = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
            bump = np.zeros((16, 16), dtype=complex)
            bump[3:9, 3:9] = 1.25 * (sub + sub.conj().T)
            m1 = m0 + bump
            if np.abs(np.linalg.eigvalsh(m1)).min() >= 0.025:
                break
        report = mod2z_check(raw_pair(m0, m1))
        assert report.mod2_residual < 1e-8
        assert report.exact_residual < 1e-8
        assert report.value == pytest.approx(
            report.eta0 - (2 * report.sf
                           - (report.kernel_dims[1] - report.kernel_dims[0])),
            abs=1e-12)
