"""Relative spectral invariants of discretized Dirac-type operators.

Finite Hermitian matrices stand in for self-adjoint elliptic operators;
every regularized quantity (relative eta/zeta values, spectral flow, Krein
shift, boundary-condition families) is computed by genuinely running the
analytic definitions — Mellin splits, asymptotic fits, closed-form tails —
and the package's test suite checks the resulting identities against
independent finite-dimensional oracles.
"""

from .errors import (
    ConfigError,
    DegenerateSpectrum,
    FitUnstable,
    InvalidPotential,
    InvalidTheta,
    InvalidTime,
    NearPole,
    NoSignal,
    NotCompactlySupported,
    NotProductNearCut,
    NotSelfAdjoint,
    SchemeMismatch,
    SingularBoundaryOperator,
    SpectralEtaError,
    StencilStraddlesCrossing,
    SupportTooSmall,
    TrackingFailed,
)
from .lattice import (
    BoundaryOperator,
    DiracOperator,
    Grid,
    OperatorPair,
    OperatorPath,
    Potential,
    build_aps_halfline,
    build_dirac_1d,
    build_dirac_2d,
    distance_to_origin,
    gaussian_profile,
    make_pair,
    make_path,
    path_between,
    raw_pair,
    restrict_to_boundary,
    split_at_cut,
)
from .spectral import (
    HeatTraceSamples,
    Spectrum,
    eigensolve,
    eta_trace,
    heat_trace,
    kernel_dim,
    relative_trace,
    sample_relative_trace,
    spectral_gap,
)
from .etazeta import (
    AsymptoticFit,
    EtaConfig,
    EtaValue,
    additivity_check,
    antisymmetry_residual,
    closed_form_tail,
    eta_direct,
    finite_part_eta,
    fit_short_time,
    reduced_eta,
    relative_eta_function,
    relative_eta_invariant,
    relative_zeta_invariant,
)
from .flow import (
    DecayReport,
    FlowResult,
    ParityReport,
    SfEtaReport,
    SpectralShift,
    TestFunction,
    bump_function,
    decay_check,
    even_coefficient_check,
    krein_check,
    modulated_bump,
    polynomial_bump,
    sf_eta_identity,
    spectral_flow,
    spectral_shift,
    standard_test_functions,
    variation_check,
    variation_coefficient,
)
from .gluing import (
    GluingReport,
    Mod2ZReport,
    ThetaBVP,
    ThetaScan,
    build_theta_bvp,
    default_theta_grid,
    gluing_check,
    mod2z_check,
    theta_xi_scan,
)

__version__ = "0.1.0"
