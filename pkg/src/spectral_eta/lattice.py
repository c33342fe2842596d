"""Discretized Dirac-type operators on 1D/2D grids, pairs, paths, cuts.

Conventions used throughout:

* flat index = node * bundle_rank + spinor component, nodes in row-major
  order (2D node = i * P + j, axis-1 index i outermost);
* the 1D model operator is  -i s1 d/dx + V(x),  the 2D one is
  -i s1 d/dx1 - i s2 d/dx2 + diag(f, -f),  with s1, s2, s3 the Pauli
  matrices acting on the rank-2 bundle;
* cutting at a node doubles it: each half keeps the full diagonal block at
  its copy of the cut node and the coupling to its inner neighbour is
  scaled by sqrt(2).  With that weighting the map sending a function on the
  uncut grid to (..., x_c/sqrt2 | x_c/sqrt2, ...) is an isometry that
  intertwines the doubled operator with the original one exactly, which is
  what makes the transmission endpoint of the boundary-condition family an
  exact multiset identity rather than an O(h) one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    InvalidPotential,
    NotCompactlySupported,
    NotProductNearCut,
    SchemeMismatch,
    SingularBoundaryOperator,
)
from .spectral import require_hermitian

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

TOPOLOGIES = ("periodic", "truncated-line", "half-line")
SCHEMES = ("central-difference", "spectral")

POTENTIAL_KINDS = ("diagonal-sigma3", "diagonal-general", "matrix-valued")

_BLOCK_HERM_RTOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a line segment, circle, half-line or square."""

    dim: int
    points_per_axis: int
    spacing: float
    topology: str = "truncated-line"
    origin_offset: tuple = (0.0,)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.points_per_axis < 4:
            raise ValueError("need at least 4 points per axis")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.topology == "half-line" and self.dim != 1:
            raise ValueError("half-line topology is one-dimensional")
        off = tuple(float(x) for x in np.atleast_1d(self.origin_offset))
        if len(off) != self.dim:
            off = tuple(off[:1]) * self.dim if len(off) == 1 else off
        if len(off) != self.dim:
            raise ValueError("origin_offset length must match dim")
        object.__setattr__(self, "origin_offset", off)

    @property
    def n_nodes(self) -> int:
        return self.points_per_axis**self.dim

    def axis_coordinates(self, axis: int = 0) -> np.ndarray:
        p, h = self.points_per_axis, self.spacing
        return self.origin_offset[axis] + h * np.arange(p)

    def coordinates(self) -> np.ndarray:
        """(n_nodes, dim) array of node positions, row-major node order."""
        if self.dim == 1:
            return self.axis_coordinates(0)[:, None]
        x = self.axis_coordinates(0)
        y = self.axis_coordinates(1)
        xx, yy = np.meshgrid(x, y, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def boundary_nodes(self) -> frozenset[int]:
        """Nodes on the truncation boundary (empty for periodic topology)."""
        if self.topology == "periodic":
            return frozenset()
        p = self.points_per_axis
        if self.dim == 1:
            return frozenset({0, p - 1})
        edge = {0, p - 1}
        nodes = set()
        for i in range(p):
            for j in range(p):
                if i in edge or j in edge:
                    nodes.add(i * p + j)
        return frozenset(nodes)


@dataclass(frozen=True)
class Potential:
    """Per-node Hermitian 2x2 blocks added to the free operator."""

    samples: np.ndarray  # (n_nodes, 2, 2) complex
    kind: str
    support: frozenset[int]

    @staticmethod
    def _validated(samples: np.ndarray, kind: str) -> "Potential":
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim != 3 or samples.shape[1:] != (2, 2):
            raise InvalidPotential("samples must have shape (n_nodes, 2, 2)")
        if kind not in POTENTIAL_KINDS:
            raise InvalidPotential(f"unknown potential kind {kind!r}")
        scale = np.abs(samples).max() if samples.size else 0.0
        defect = np.abs(samples - samples.conj().transpose(0, 2, 1)).max() if samples.size else 0.0
        if defect > _BLOCK_HERM_RTOL * (1.0 + scale):
            raise InvalidPotential("potential blocks must be Hermitian")
        support = frozenset(
            int(i) for i in np.nonzero(np.abs(samples).max(axis=(1, 2)) > 0.0)[0]
        )
        return Potential(samples, kind, support)

    @classmethod
    def sigma3(cls, values) -> "Potential":
        """Chiral potential v(x) * s3, from real per-node values."""
        v = np.asarray(values, dtype=float)
        if v.ndim != 1:
            raise InvalidPotential("sigma3 potential takes a flat value array")
        blocks = v[:, None, None] * SIGMA3[None, :, :]
        return cls._validated(blocks, "diagonal-sigma3")

    @classmethod
    def diagonal(cls, entries) -> "Potential":
        e = np.asarray(entries, dtype=float)
        if e.ndim != 2 or e.shape[1] != 2:
            raise InvalidPotential("diagonal potential takes shape (n_nodes, 2)")
        blocks = np.zeros((e.shape[0], 2, 2), dtype=complex)
        blocks[:, 0, 0] = e[:, 0]
        blocks[:, 1, 1] = e[:, 1]
        return cls._validated(blocks, "diagonal-general")

    @classmethod
    def from_blocks(cls, blocks) -> "Potential":
        return cls._validated(blocks, "matrix-valued")

    def block_diagonal(self) -> np.ndarray:
        n = self.samples.shape[0]
        m = np.zeros((2 * n, 2 * n), dtype=complex)
        view = m.reshape(n, 2, n, 2)
        idx = np.arange(n)
        view[idx, :, idx, :] = self.samples
        return m


@dataclass
class DiracOperator:
    """A finite Hermitian realization of a Dirac-type operator."""

    matrix: np.ndarray
    manifold_dim: int = 1
    grid: Grid | None = None
    derivative_scheme: str = "central-difference"
    bundle_rank: int = 2
    constraint_subspace: np.ndarray | None = None  # ambient-to-domain isometry

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        require_hermitian(self.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix, manifold_dim: int = 1) -> "DiracOperator":
        """Wrap a bare Hermitian matrix (grid-free model)."""
        return cls(np.asarray(matrix, dtype=complex), manifold_dim=manifold_dim,
                   grid=None, bundle_rank=1)


@dataclass(frozen=True)
class OperatorPair:
    """Two operators on the same space differing on a compact node set."""

    a0: DiracOperator
    a1: DiracOperator
    diff_support: tuple

    def __iter__(self):
        return iter((self.a0, self.a1))


@dataclass(frozen=True)
class BoundaryOperator:
    """Induced self-adjoint operator on the boundary fiber at a cut."""

    matrix: np.ndarray
    cut_location: int


# --- derivative matrices -----------------------------------------------------

def _central_difference(p: int, h: float, periodic: bool) -> np.ndarray:
    d = np.zeros((p, p))
    c = 1.0 / (2.0 * h)
    for i in range(p):
        if i + 1 < p:
            d[i, i + 1] = c
        if i - 1 >= 0:
            d[i, i - 1] = -c
    if periodic:
        d[p - 1, 0] = c
        d[0, p - 1] = -c
    return d


def _spectral_derivative(p: int, h: float) -> np.ndarray:
    # Exact differentiation of trigonometric interpolants: conjugate
    # diag(i k) by the DFT.  The Nyquist mode is kept at |k| = pi/h, which
    # keeps the free symbol's eigenvalue multiplicities faithful (the matrix
    # is complex anti-Hermitian rather than real antisymmetric).
    k = 2.0 * np.pi * np.fft.fftfreq(p, d=h)
    d = np.fft.ifft(1j * k[:, None] * np.fft.fft(np.eye(p), axis=0), axis=0)
    return 0.5 * (d - d.conj().T)  # scrub roundoff; exactly anti-Hermitian


def _derivative_matrix(grid: Grid, scheme: str) -> np.ndarray:
    if scheme not in SCHEMES:
        raise SchemeMismatch(f"unknown derivative scheme {scheme!r}")
    periodic = grid.topology == "periodic"
    if scheme == "spectral":
        if not periodic:
            raise SchemeMismatch("spectral differentiation requires a periodic grid")
        return _spectral_derivative(grid.points_per_axis, grid.spacing)
    return _central_difference(grid.points_per_axis, grid.spacing, periodic)


def _as_potential(pot, n_nodes: int) -> Potential:
    if isinstance(pot, Potential):
        p = pot
    else:
        p = Potential.sigma3(np.asarray(pot, dtype=float))
    if p.samples.shape[0] != n_nodes:
        raise InvalidPotential(
            f"potential has {p.samples.shape[0]} nodes, grid has {n_nodes}"
        )
    return p


# --- operator builders -------------------------------------------------------

def build_dirac_1d(grid: Grid, potential, scheme: str = "central-difference") -> DiracOperator:
    """-i s1 d/dx + V(x) on a 1D grid.

    `potential` is a Potential or a flat array of real values, the latter
    meaning the chiral form v(x) s3.
    """
    if grid.dim != 1:
        raise SchemeMismatch("build_dirac_1d needs a one-dimensional grid")
    pot = _as_potential(potential, grid.n_nodes)
    d1 = _derivative_matrix(grid, scheme)
    m = np.kron(d1, -1j * SIGMA1) + pot.block_diagonal()
    return DiracOperator(m, manifold_dim=1, grid=grid, derivative_scheme=scheme)


def build_dirac_2d(grid: Grid, f, scheme: str = "central-difference") -> DiracOperator:
    """-i s1 d/dx1 - i s2 d/dx2 + diag(f, -f) on a square grid.

    `f` is a real per-node array (flat, row-major) or a sigma3 Potential;
    the zeroth-order term anticommutes with both Clifford matrices by
    construction.
    """
    if grid.dim != 2:
        raise SchemeMismatch("build_dirac_2d needs a two-dimensional grid")
    if isinstance(f, Potential):
        if f.kind != "diagonal-sigma3":
            raise InvalidPotential("the 2D model takes a chiral (sigma3) potential")
        pot = _as_potential(f, grid.n_nodes)
    else:
        fv = np.asarray(f, dtype=float).ravel()
        pot = _as_potential(fv, grid.n_nodes)
    p = grid.points_per_axis
    d1 = _derivative_matrix(grid, scheme)
    eye = np.eye(p)
    dx = np.kron(d1, eye)
    dy = np.kron(eye, d1)
    m = np.kron(dx, -1j * SIGMA1) + np.kron(dy, -1j * SIGMA2) + pot.block_diagonal()
    return DiracOperator(m, manifold_dim=2, grid=grid, derivative_scheme=scheme)


# --- pairs and paths ---------------------------------------------------------

def _check_compact_support(grid: Grid | None, support: frozenset[int],
                           n_nodes: int) -> None:
    if len(support) >= n_nodes:
        raise NotCompactlySupported("perturbation must vanish somewhere")
    if grid is not None and support & grid.boundary_nodes():
        raise NotCompactlySupported("perturbation touches the grid boundary")


def make_pair(a0: DiracOperator, patch) -> OperatorPair:
    """Perturb a0 by a compactly supported potential patch."""
    if a0.grid is None:
        raise SchemeMismatch("make_pair needs a grid-based operator; "
                             "wrap raw matrices in an OperatorPair directly")
    pot = _as_potential(patch, a0.grid.n_nodes)
    _check_compact_support(a0.grid, pot.support, a0.grid.n_nodes)
    m1 = a0.matrix + pot.block_diagonal()
    a1 = DiracOperator(m1, manifold_dim=a0.manifold_dim, grid=a0.grid,
                       derivative_scheme=a0.derivative_scheme,
                       bundle_rank=a0.bundle_rank)
    support = tuple(sorted(pot.support))
    _assert_pair_locality(a0, a1, support)
    return OperatorPair(a0, a1, support)


def raw_pair(m0: np.ndarray, m1: np.ndarray, manifold_dim: int = 1) -> OperatorPair:
    """Pair of bare Hermitian matrices differing on a compact index block."""
    a0 = DiracOperator.from_matrix(m0, manifold_dim)
    a1 = DiracOperator.from_matrix(m1, manifold_dim)
    if a0.dim != a1.dim:
        raise NotCompactlySupported("pair members must act on the same space")
    delta = np.abs(a1.matrix - a0.matrix).max(axis=1)
    support = tuple(int(i) for i in np.nonzero(delta > 0.0)[0])
    if len(support) >= a0.dim:
        raise NotCompactlySupported("pair members differ everywhere")
    return OperatorPair(a0, a1, support)


def _assert_pair_locality(a0, a1, support, rtol: float = 1e-14) -> None:
    mask = np.ones(a0.grid.n_nodes, dtype=bool)
    mask[list(support)] = False
    rows = np.repeat(mask, a0.bundle_rank)
    scale = max(np.abs(a0.matrix).max(), 1.0)
    defect = np.abs(a1.matrix[rows] - a0.matrix[rows]).max() if rows.any() else 0.0
    if defect > rtol * scale:
        raise NotCompactlySupported(
            f"pair differs outside the declared support (defect {defect:.2e})"
        )


def _linear_schedule(r):
    return float(r)


def _linear_rate(_r):
    return 1.0


@dataclass
class OperatorPath:
    """r in [0, 1] -> base + rho(r) * patch, with rho' available.

    The endpoint operators are materialized at construction; evaluating
    at(0.0)/at(1.0) later reproduces them bit for bit because the arithmetic
    is the same deterministic expression.
    """

    base: DiracOperator
    patch_matrix: np.ndarray
    schedule: Callable[[float], float] = _linear_schedule
    schedule_rate: Callable[[float], float] | None = _linear_rate

    def __post_init__(self):
        self.patch_matrix = np.asarray(self.patch_matrix, dtype=complex)
        require_hermitian(self.patch_matrix)
        if self.patch_matrix.shape != self.base.matrix.shape:
            raise NotCompactlySupported("patch must match the base dimension")
        delta = np.abs(self.patch_matrix).max(axis=1)
        rows = np.nonzero(delta > 0.0)[0]
        if rows.size >= self.base.dim:
            raise NotCompactlySupported("path perturbation must be compactly supported")
        self.support_rows = tuple(int(i) for i in rows)
        self.endpoints = (self.at(0.0), self.at(1.0))

    @property
    def derivative_available(self) -> bool:
        return self.schedule_rate is not None

    def at(self, r: float) -> DiracOperator:
        m = self.base.matrix + self.schedule(r) * self.patch_matrix
        return DiracOperator(m, manifold_dim=self.base.manifold_dim,
                             grid=self.base.grid,
                             derivative_scheme=self.base.derivative_scheme,
                             bundle_rank=self.base.bundle_rank)

    def derivative(self, r: float) -> np.ndarray:
        if not self.derivative_available:
            raise SchemeMismatch("path schedule has no derivative")
        return self.schedule_rate(r) * self.patch_matrix


def make_path(base: DiracOperator, patch, schedule=None, schedule_rate=None) -> OperatorPath:
    """Path from a grid potential patch or a raw Hermitian matrix."""
    if isinstance(patch, Potential) or (base.grid is not None and np.ndim(patch) == 1):
        pot = _as_potential(patch, base.grid.n_nodes)
        _check_compact_support(base.grid, pot.support, base.grid.n_nodes)
        pm = pot.block_diagonal()
    else:
        pm = np.asarray(patch, dtype=complex)
    kwargs = {}
    if schedule is not None:
        kwargs["schedule"] = schedule
        kwargs["schedule_rate"] = schedule_rate
    return OperatorPath(base, pm, **kwargs)


def path_between(pair: OperatorPair, schedule=None, schedule_rate=None) -> OperatorPath:
    """Linear (or rescheduled) segment from pair.a0 to pair.a1."""
    patch = pair.a1.matrix - pair.a0.matrix
    kwargs = {}
    if schedule is not None:
        kwargs["schedule"] = schedule
        kwargs["schedule_rate"] = schedule_rate
    return OperatorPath(pair.a0, patch, **kwargs)


# --- cutting -----------------------------------------------------------------

def _diag_block(matrix: np.ndarray, node: int, rank: int) -> np.ndarray:
    i = rank * node
    return matrix[i:i + rank, i:i + rank]


def restrict_to_boundary(a: DiracOperator, cut: int, collar_width: int = 3,
                         kernel_tol: float = 1e-8) -> BoundaryOperator:
    """Boundary fiber operator v(cut) * s2 of a product-form 1D model.

    Requires a central-difference 1D operator whose potential is constant
    and of chiral form v * s3 on a collar of `collar_width` nodes centred
    at the cut.  Tangential factorization of -i s1 (d/dx) + v s3 along the
    normal direction produces (i s1)^(-1) v s3 = v s2 on the fiber.
    """
    if a.grid is None or a.grid.dim != 1:
        raise SchemeMismatch("boundary restriction is defined for 1D grid operators")
    if a.derivative_scheme != "central-difference":
        raise SchemeMismatch("boundary restriction needs the central-difference scheme")
    half = max(collar_width // 2, 1)
    p = a.grid.points_per_axis
    if cut - half < 0 or cut + half >= p:
        raise NotProductNearCut("collar around the cut extends beyond the grid")
    w = _diag_block(a.matrix, cut, a.bundle_rank)
    scale = 1.0 + np.abs(w).max()
    for node in range(cut - half, cut + half + 1):
        wj = _diag_block(a.matrix, node, a.bundle_rank)
        if np.abs(wj - w).max() > 1e-12 * scale:
            raise NotProductNearCut("potential varies across the collar")
    off = abs(w[0, 1]) + abs(w[1, 0])
    if off > 1e-12 * scale or abs(w[0, 0] + w[1, 1]) > 1e-12 * scale \
            or abs(w[0, 0].imag) > 1e-12 * scale:
        raise NotProductNearCut("collar potential is not of chiral (sigma3) form")
    v = float(w[0, 0].real)
    op_scale = 1.0 + float(np.abs(a.matrix).sum(axis=1).max())  # inf-norm bound
    if abs(v) <= kernel_tol * op_scale:
        raise SingularBoundaryOperator("boundary operator is numerically singular")
    return BoundaryOperator(v * SIGMA2, cut)


def split_at_cut(a: DiracOperator, cut: int, collar_width: int = 3):
    """(left, right, boundary_op): sqrt(2)-weighted halves sharing the cut node.

    Both halves keep the full diagonal block at their copy of the cut node;
    the coupling to the inner neighbour is scaled by sqrt(2) (see module
    docstring).  Fails with SchemeMismatch when any coupling skips the cut
    node (non-tridiagonal schemes, periodic wrap-around).
    """
    b = restrict_to_boundary(a, cut, collar_width)
    r = a.bundle_rank
    h = a.matrix
    i0, i1 = r * cut, r * (cut + 1)
    if i0 > 0 and i1 < h.shape[0]:
        crossing = np.abs(h[:i0, i1:]).max()
        if crossing > 0.0:
            raise SchemeMismatch("couplings skip the cut node; cannot split")
    s2 = np.sqrt(2.0)
    left = h[:i1, :i1].copy()
    left[i0 - r:i0, i0:i1] *= s2
    left[i0:i1, i0 - r:i0] *= s2
    right = h[i0:, i0:].copy()
    right[0:r, r:2 * r] *= s2
    right[r:2 * r, 0:r] *= s2
    return left, right, b


def _spectral_projector(b: np.ndarray, keep_negative: bool, dual: bool) -> np.ndarray:
    """Orthonormal basis (columns) of the admissible boundary subspace."""
    lam, vec = np.linalg.eigh(b)
    if dual:
        keep = lam <= 0.0  # annihilate only the strictly positive part
    else:
        keep = lam < 0.0  # annihilate the nonnegative part
    return vec[:, keep]


def build_aps_halfline(a: DiracOperator, cut: int, side: str = "left",
                       dual: bool = False, collar_width: int = 3) -> DiracOperator:
    """Compress one half of a cut operator onto spectral boundary conditions.

    The admissible boundary data at the cut node is the negative spectral
    subspace of the half's own boundary operator (+v s2 seen from the right
    half, -v s2 from the left, the inward coordinate flipping the normal
    derivative); `dual=True` admits the non-positive subspace instead,
    which only differs when the boundary operator is singular (and that is
    rejected upstream).
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    left, right, b = split_at_cut(a, cut, collar_width)
    r = a.bundle_rank
    p = a.grid.points_per_axis
    if side == "left":
        half, n_nodes = left, cut + 1
        b_side = -b.matrix
        cut_slice = slice(half.shape[0] - r, half.shape[0])
    else:
        half, n_nodes = right, p - cut
        b_side = b.matrix
        cut_slice = slice(0, r)
    if n_nodes < 4:
        raise NotProductNearCut("cut leaves fewer than 4 nodes on this side")
    keep = _spectral_projector(b_side, True, dual)
    dim = half.shape[0]
    q = np.zeros((dim, dim - r + keep.shape[1]), dtype=complex)
    free = [i for i in range(dim) if not (cut_slice.start <= i < cut_slice.stop)]
    for col, i in enumerate(free):
        q[i, col] = 1.0
    q[cut_slice, len(free):] = keep
    compressed = q.conj().T @ half @ q
    compressed = 0.5 * (compressed + compressed.conj().T)
    half_grid = Grid(1, n_nodes, a.grid.spacing, "half-line",
                     (0.0,))
    return DiracOperator(compressed, manifold_dim=1, grid=half_grid,
                         derivative_scheme=a.derivative_scheme,
                         bundle_rank=r, constraint_subspace=q)


# --- experiment helpers ------------------------------------------------------

def gaussian_profile(grid: Grid, amplitude: float, center, width: float,
                     cutoff: float = 3.0) -> np.ndarray:
    """Hard-truncated Gaussian bump sampled on the grid (exactly compact)."""
    x = grid.coordinates()
    c = np.atleast_1d(np.asarray(center, dtype=float))
    r2 = ((x - c[None, :]) ** 2).sum(axis=1)
    vals = amplitude * np.exp(-r2 / (2.0 * width**2))
    vals[r2 > (cutoff * width) ** 2] = 0.0
    return vals


def distance_to_origin(grid: Grid) -> np.ndarray:
    """|x| per node; on periodic grids the wrap-minimal image distance."""
    x = grid.coordinates()
    if grid.topology == "periodic":
        length = grid.points_per_axis * grid.spacing
        x = x - length * np.round(x / length)
    return np.sqrt((x**2).sum(axis=1))
