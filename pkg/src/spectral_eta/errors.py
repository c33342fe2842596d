"""Exception types shared across the package.

Each numerical stage has a small set of failure modes that callers are
expected to distinguish (configuration problems vs. genuine numeric
breakdown), so they get their own classes instead of bare ValueErrors.
"""

from __future__ import annotations


class SpectralEtaError(Exception):
    """Base class for all package-specific errors."""


# --- construction / configuration -------------------------------------------

class InvalidPotential(SpectralEtaError):
    """Potential samples are malformed (non-Hermitian block, wrong shape...)."""


class SchemeMismatch(SpectralEtaError):
    """Operation requires a derivative scheme/topology the operator lacks."""


class NotCompactlySupported(SpectralEtaError):
    """A patch or path perturbation is not strictly interior to the grid."""


class NotProductNearCut(SpectralEtaError):
    """The operator is not in product form on a collar around the cut."""


class SingularBoundaryOperator(SpectralEtaError):
    """The induced boundary operator has (numerically) vanishing eigenvalues."""


class InvalidTheta(SpectralEtaError):
    """Boundary-family parameter outside the open interval (-pi/2, pi/2)."""


class ConfigError(SpectralEtaError):
    """Experiment configuration missing required fields or inconsistent."""


# --- spectral computations ---------------------------------------------------

class NotSelfAdjoint(SpectralEtaError):
    """Matrix fails the Hermiticity check."""


class InvalidTime(SpectralEtaError):
    """Heat-trace time parameter must be strictly positive."""


class DegenerateSpectrum(SpectralEtaError):
    """No nonzero eigenvalues: the spectral gap is undefined."""


# --- fitting / analytic continuation -----------------------------------------

class FitUnstable(SpectralEtaError):
    """Short-time fit is ill-conditioned beyond the accepted threshold."""


class NearPole(SpectralEtaError):
    """Function evaluation requested too close to a pole of the family."""


# --- flow / shift ------------------------------------------------------------

class TrackingFailed(SpectralEtaError):
    """Eigenvalue tracking exceeded the refinement budget."""


class SupportTooSmall(SpectralEtaError):
    """Test-function support does not cover the union of both spectra."""


class NoSignal(SpectralEtaError):
    """Relative trace is identically zero at sampling precision."""


class StencilStraddlesCrossing(SpectralEtaError):
    """A finite-difference stencil spans an eigenvalue crossing."""
