"""Eigendecompositions and (relative) heat traces for Hermitian operators.

Everything downstream — invariant extraction, flow counting, shift
functions — consumes the `Spectrum` objects produced here.  Traces are
computed as exact finite sums over eigenvalues; there is no stochastic
estimation anywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrum, InvalidTime, NotSelfAdjoint

HERMITICITY_RTOL = 1e-12
DEFAULT_KERNEL_TOL = 1e-8

TRACE_KINDS = (
    "plain",
    "eta-weighted",
    "relative",
    "relative-eta-weighted",
    "derivative-weighted",
)


def _as_matrix(operator) -> np.ndarray:
    """Accept either a bare ndarray or anything with a .matrix attribute."""
    m = getattr(operator, "matrix", operator)
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSelfAdjoint(f"expected a square matrix, got shape {m.shape}")
    return m


def hermiticity_defect(matrix: np.ndarray) -> float:
    """Max-norm of M - M^H, relative to the max-norm of M (0 for M = 0)."""
    scale = np.abs(matrix).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(matrix - matrix.conj().T).max() / scale)


def require_hermitian(matrix: np.ndarray, rtol: float = HERMITICITY_RTOL) -> None:
    defect = hermiticity_defect(matrix)
    if defect >= rtol:
        raise NotSelfAdjoint(
            f"Hermiticity defect {defect:.3e} exceeds tolerance {rtol:.1e}"
        )


@dataclass
class Spectrum:
    """Sorted eigenvalues (and optionally eigenvectors) of one operator.

    eigenvalues are ascending; eigenvectors, when present, are the columns of
    `vectors` in the same order.  `kernel_tol` is the relative threshold used
    by `kernel_dim`; `source_dim` records the dimension of the matrix the
    spectrum came from (== len(eigenvalues) here, kept explicit because some
    consumers compare spectra of operators living on different spaces).
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray | None = None
    kernel_tol: float = DEFAULT_KERNEL_TOL
    source_dim: int = 0

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if self.source_dim == 0:
            self.source_dim = self.eigenvalues.size

    @property
    def radius(self) -> float:
        """Spectral radius max|lambda| (0 for an empty spectrum)."""
        if self.eigenvalues.size == 0:
            return 0.0
        return float(np.abs(self.eigenvalues).max())

    @property
    def kernel_threshold(self) -> float:
        return self.kernel_tol * (1.0 + self.radius)

    def nonzero(self) -> np.ndarray:
        """Eigenvalues with |lambda| at or above the kernel threshold."""
        lam = self.eigenvalues
        return lam[np.abs(lam) >= self.kernel_threshold]

    def counts(self) -> tuple[int, int, int]:
        """(n_minus, n_zero, n_plus) relative to the kernel threshold."""
        thr = self.kernel_threshold
        lam = self.eigenvalues
        n_minus = int(np.count_nonzero(lam < -thr))
        n_plus = int(np.count_nonzero(lam > thr))
        return n_minus, lam.size - n_minus - n_plus, n_plus

    def signature(self) -> int:
        n_minus, _, n_plus = self.counts()
        return n_plus - n_minus


@dataclass
class HeatTraceSamples:
    """A sampled trace curve t -> value with its weighting convention."""

    t_grid: np.ndarray
    values: np.ndarray
    kind: str = "plain"

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in TRACE_KINDS:
            raise ValueError(f"unknown trace kind {self.kind!r}")
        if self.t_grid.shape != self.values.shape:
            raise ValueError("t_grid and values must have matching shapes")


def eigensolve(operator, want_vectors: bool = False,
               kernel_tol: float = DEFAULT_KERNEL_TOL) -> Spectrum:
    """Full Hermitian eigendecomposition.

    Raises NotSelfAdjoint when the Hermiticity defect exceeds 1e-12
    relative to the matrix max-norm.
    """
    m = _as_matrix(operator)
    require_hermitian(m)
    if want_vectors:
        lam, vec = np.linalg.eigh(m)
        return Spectrum(lam, vec, kernel_tol=kernel_tol, source_dim=m.shape[0])
    lam = np.linalg.eigvalsh(m)
    return Spectrum(lam, None, kernel_tol=kernel_tol, source_dim=m.shape[0])


def kernel_dim(spectrum: Spectrum) -> int:
    """Number of eigenvalues below the relative kernel threshold in modulus."""
    return spectrum.counts()[1]


def _check_time(t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0.0):
        raise InvalidTime("heat-trace times must be strictly positive")
    return t


def heat_trace(spectrum: Spectrum, t) -> np.ndarray | float:
    """Tr exp(-t A^2) = sum_i exp(-t lambda_i^2)."""
    tt = _check_time(t)
    lam2 = spectrum.eigenvalues**2
    out = np.exp(-np.outer(tt, lam2)).sum(axis=1)
    return out if np.ndim(t) else float(out[0])


def eta_trace(spectrum: Spectrum, t) -> np.ndarray | float:
    """Tr A exp(-t A^2) = sum_i lambda_i exp(-t lambda_i^2)."""
    tt = _check_time(t)
    lam = spectrum.eigenvalues
    out = (lam * np.exp(-np.outer(tt, lam**2))).sum(axis=1)
    return out if np.ndim(t) else float(out[0])


def weighted_trace(spectrum: Spectrum, weights: np.ndarray, t) -> np.ndarray | float:
    """sum_i w_i exp(-t lambda_i^2) for externally supplied weights."""
    tt = _check_time(t)
    weights = np.asarray(weights, dtype=float)
    out = (weights * np.exp(-np.outer(tt, spectrum.eigenvalues**2))).sum(axis=1)
    return out if np.ndim(t) else float(out[0])


def relative_trace(pair: tuple[Spectrum, Spectrum], t,
                   weighted: bool = False) -> np.ndarray | float:
    """Difference of traces, second spectrum minus first.

    weighted=False: Tr exp(-t A1^2) - Tr exp(-t A0^2)
    weighted=True:  Tr A1 exp(-t A1^2) - Tr A0 exp(-t A0^2)
    """
    s0, s1 = pair
    f = eta_trace if weighted else heat_trace
    return f(s1, t) - f(s0, t)


def sample_relative_trace(pair: tuple[Spectrum, Spectrum], t_grid,
                          weighted: bool = True) -> HeatTraceSamples:
    kind = "relative-eta-weighted" if weighted else "relative"
    t_grid = _check_time(t_grid)
    return HeatTraceSamples(t_grid, relative_trace(pair, t_grid, weighted), kind)


def spectral_gap(pair: tuple[Spectrum, Spectrum]) -> float:
    """Smallest nonzero |eigenvalue| across both spectra.

    Raises DegenerateSpectrum when either operator has no nonzero
    eigenvalue at all (the gap would be meaningless).
    """
    gaps = []
    for s in pair:
        nz = np.abs(s.nonzero())
        if nz.size == 0:
            raise DegenerateSpectrum("an operator has no nonzero eigenvalues")
        gaps.append(nz.min())
    return float(min(gaps))
