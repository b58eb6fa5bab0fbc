"""Shot noise processes: simulation, crossing counts, and scale-space tools.

A shot noise path is a sum of translated kernel copies with random
amplitudes, driven by a Poisson point process.  The package samples such
paths with certified truncation error, counts level crossings and local
extrema, computes mean crossing curves analytically through the joint
characteristic function of the process and its derivative, and follows
extrema across Gaussian smoothing scales.
"""

from .errors import (
    AccuracyError,
    CapabilityError,
    InfeasibleConditioningError,
    ParameterError,
    PhaseDegeneracyError,
    ResolutionError,
    ShotNoiseError,
    TrackingError,
    WindowError,
)
from .ppp import (
    ConditionalSample,
    ImpulseSpec,
    PointConfiguration,
    Stream,
    conditional_acceptance,
    merge_configs,
    parse_impulse,
    sample_conditional,
    sample_ppp,
    stream,
)
from .kernels import (
    KernelModel,
    MomentTable,
    PhaseParams,
    covariance,
    eval_derivative,
    gaussian_kernel,
    moments,
    parse_kernel,
    phase_params,
    register_kernel,
    truncation_radius,
)
from .paths import (
    EnsembleStats,
    SamplePath,
    SmallBallPoint,
    config_for_interval,
    ensemble_statistics,
    evaluate_path,
    normalize_path,
    small_ball_bound,
    small_ball_probability,
)
from .crossings import (
    CrossingCurve,
    CrossingTally,
    ExtremaTally,
    RolleReport,
    count_crossings,
    count_extrema,
    exp_poly_extrema_bound,
    kac_estimate,
    mc_crossing_curve,
    rolle_check,
    total_variation,
)
from .spectral import (
    ConvergenceConstants,
    GaussianLimit,
    InvertedCurve,
    SpectralCurve,
    TVBoundCheck,
    charfn_joint,
    convergence_constants,
    crossing_fourier,
    crossing_fourier_curve,
    gaussian_fourier,
    gaussian_limit,
    invert_crossing_curve,
    limit_covariance,
    rice_gaussian,
    stationary_phase_certify,
    total_variation_bound_check,
)
from .scalespace import (
    ExtremaTrack,
    RhoCurve,
    RhoEstimate,
    RhoMonotonicityReport,
    ScalingCheck,
    SemigroupCheck,
    extrema_rate_bound,
    rho_estimate,
    rho_monotonicity_report,
    scaling_check,
    semigroup_check,
    track_extrema,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "CapabilityError",
    "ConditionalSample",
    "ConvergenceConstants",
    "CrossingCurve",
    "CrossingTally",
    "EnsembleStats",
    "ExtremaTally",
    "ExtremaTrack",
    "GaussianLimit",
    "ImpulseSpec",
    "InfeasibleConditioningError",
    "InvertedCurve",
    "KernelModel",
    "MomentTable",
    "ParameterError",
    "PhaseDegeneracyError",
    "PhaseParams",
    "PointConfiguration",
    "ResolutionError",
    "RhoCurve",
    "RhoEstimate",
    "RhoMonotonicityReport",
    "RolleReport",
    "SamplePath",
    "ScalingCheck",
    "SemigroupCheck",
    "ShotNoiseError",
    "SmallBallPoint",
    "SpectralCurve",
    "Stream",
    "TrackingError",
    "TVBoundCheck",
    "WindowError",
    "charfn_joint",
    "conditional_acceptance",
    "config_for_interval",
    "convergence_constants",
    "count_crossings",
    "count_extrema",
    "covariance",
    "crossing_fourier",
    "crossing_fourier_curve",
    "ensemble_statistics",
    "eval_derivative",
    "evaluate_path",
    "exp_poly_extrema_bound",
    "extrema_rate_bound",
    "gaussian_fourier",
    "gaussian_kernel",
    "gaussian_limit",
    "invert_crossing_curve",
    "kac_estimate",
    "limit_covariance",
    "mc_crossing_curve",
    "merge_configs",
    "moments",
    "normalize_path",
    "parse_impulse",
    "parse_kernel",
    "phase_params",
    "register_kernel",
    "rho_estimate",
    "rho_monotonicity_report",
    "rice_gaussian",
    "rolle_check",
    "sample_conditional",
    "sample_ppp",
    "scaling_check",
    "semigroup_check",
    "small_ball_bound",
    "small_ball_probability",
    "stationary_phase_certify",
    "stream",
    "total_variation",
    "total_variation_bound_check",
    "track_extrema",
    "truncation_radius",
]
