"""Grid, operator, pairing and path construction checks."""

import numpy as np
import pytest

from spectral_eta import (
    Grid,
    InvalidPotential,
    NotCompactlySupported,
    Potential,
    SchemeMismatch,
    build_aps_halfline,
    build_dirac_1d,
    build_dirac_2d,
    distance_to_origin,
    gaussian_profile,
    make_pair,
    make_path,
    path_between,
    raw_pair,
)

HERM_TOL = 1e-13
EXACT_TOL = 1e-14


def _line_grid(n=32, spacing=0.5):
    return Grid(1, n, spacing, "truncated-line", (-0.5 * n * spacing,))


def test_grid_coordinates_and_boundary():
    grid = _line_grid(n=16, spacing=0.25)
    x = grid.axis_coordinates()
    assert x.shape == (16,)
    assert x[0] == pytest.approx(-2.0)
    assert np.allclose(np.diff(x), 0.25)
    assert grid.boundary_nodes() == frozenset({0, 15})
    ring = Grid(1, 16, 0.25, "periodic", (0.0,))
    assert ring.boundary_nodes() == frozenset()


def test_grid_rejects_bad_dimension():
    with pytest.raises(ValueError):
        Grid(3, 16, 0.5)


def test_free_operator_hermitian_on_both_topologies():
    # at zero potential the whole matrix is -i sigma1 x D with D real
    # antisymmetric, so Hermiticity probes the derivative stencils
    for topology in ("truncated-line", "periodic"):
        grid = Grid(1, 24, 0.3, topology, (0.0,))
        a = build_dirac_1d(grid, np.zeros(24))
        assert np.abs(a.matrix - a.matrix.conj().T).max() < HERM_TOL
        assert np.abs(a.matrix.real).max() == 0.0


def test_dirac_1d_shape_and_hermiticity():
    grid = _line_grid()
    a = build_dirac_1d(grid, np.ones(32))
    assert a.dim == 64
    assert np.abs(a.matrix - a.matrix.conj().T).max() < HERM_TOL


def test_dirac_2d_spectral_scheme_needs_periodic_grid():
    grid = Grid(2, 8, 1.0, "truncated-line", (0.0, 0.0))
    with pytest.raises(SchemeMismatch):
        build_dirac_2d(grid, np.ones(64), scheme="spectral")


def test_dirac_2d_hermitian_on_torus():
    grid = Grid(2, 8, 1.0, "periodic", (-3.5, -3.5))
    a = build_dirac_2d(grid, distance_to_origin(grid), scheme="spectral")
    assert a.dim == 128
    assert np.abs(a.matrix - a.matrix.conj().T).max() < HERM_TOL


def test_potential_validation():
    with pytest.raises(InvalidPotential):
        Potential.sigma3(np.ones((4, 2)))
    grid = Grid(2, 8, 1.0, "periodic", (0.0, 0.0))
    entries = np.ones((64, 2))
    with pytest.raises(InvalidPotential):
        build_dirac_2d(grid, Potential.diagonal(entries))


def test_gaussian_profile_compact_support():
    grid = _line_grid(n=64, spacing=0.25)
    bump = gaussian_profile(grid, -2.0, (1.0,), 0.5)
    x = grid.axis_coordinates()
    outside = np.abs(x - 1.0) > 1.5  # cutoff * width
    assert np.all(bump[outside] == 0.0)
    peak = np.argmax(np.abs(bump))
    assert bump[peak] == pytest.approx(-2.0, abs=0.15)


def test_distance_to_origin_wraps_on_circle():
    grid = Grid(1, 8, 1.0, "periodic", (0.0,))
    d = distance_to_origin(grid)
    assert d[7] == pytest.approx(1.0)
    assert d[4] == pytest.approx(4.0)


def test_make_pair_difference_is_the_patch():
    grid = _line_grid()
    base = build_dirac_1d(grid, np.ones(32))
    patch = gaussian_profile(grid, -1.5, (0.0,), 0.6)
    pair = make_pair(base, patch)
    delta = pair.a1.matrix - pair.a0.matrix
    expected = Potential.sigma3(patch).block_diagonal()
    assert np.abs(delta - expected).max() < EXACT_TOL
    assert 0 < len(pair.diff_support) < 32


def test_make_pair_rejects_global_patch():
    grid = _line_grid()
    base = build_dirac_1d(grid, np.ones(32))
    with pytest.raises(NotCompactlySupported):
        make_pair(base, np.ones(32))


def test_raw_pair_rejects_everywhere_difference():
    rng = np.random.default_rng(7)
    m0 = rng.normal(size=(6, 6))
    m0 = m0 + m0.T
    with pytest.raises(NotCompactlySupported):
        raw_pair(m0, m0 + np.eye(6))


def test_raw_pair_block_difference_support():
    rng = np.random.default_rng(8)
    m0 = rng.normal(size=(10, 10))
    m0 = m0 + m0.T
    bump = np.zeros((10, 10))
    bump[2:5, 2:5] = 1.0
    pair = raw_pair(m0, m0 + bump)
    assert set(pair.diff_support) == {2, 3, 4}


def test_path_interpolates_linearly():
    grid = _line_grid()
    base = build_dirac_1d(grid, np.ones(32))
    patch = gaussian_profile(grid, -1.5, (0.0,), 0.6)
    path = make_path(base, patch)
    pair = make_pair(base, patch)
    assert np.abs(path.at(0.0).matrix - pair.a0.matrix).max() == 0.0
    assert np.abs(path.at(1.0).matrix - pair.a1.matrix).max() < EXACT_TOL
    mid = 0.5 * (pair.a0.matrix + pair.a1.matrix)
    assert np.abs(path.at(0.5).matrix - mid).max() < EXACT_TOL
    # linear schedule: the derivative is the patch itself, at every r
    expected = Potential.sigma3(patch).block_diagonal()
    assert np.abs(path.derivative(0.3) - expected).max() < EXACT_TOL


def test_path_between_matches_pair_endpoints():
    rng = np.random.default_rng(9)
    m0 = rng.normal(size=(8, 8))
    m0 = m0 + m0.T
    bump = np.zeros((8, 8))
    bump[1:4, 1:4] = 0.5
    pair = raw_pair(m0, m0 + bump)
    path = path_between(pair)
    assert np.abs(path.at(0.0).matrix - pair.a0.matrix).max() == 0.0
    assert np.abs(path.at(1.0).matrix - pair.a1.matrix).max() < EXACT_TOL


def test_aps_halfline_shapes():
    grid = _line_grid(n=48, spacing=0.5)
    a = build_dirac_1d(grid, np.ones(48))
    cut = 30
    left = build_aps_halfline(a, cut, side="left")
    right = build_aps_halfline(a, cut, side="right")
    assert left.dim + right.dim == a.dim
    for half in (left, right):
        assert np.abs(half.matrix - half.matrix.conj().T).max() < HERM_TOL
