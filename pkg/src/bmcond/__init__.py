"""Closed-form conditional laws of Brownian motion on [0, 1] and a Monte
Carlo engine that validates them.

Conditioning variables: the maximum (high), its location (argmax), the
final value (close), and optionally the minimum (low).
"""

from .analytic import (
    ExtremaTriple,
    MeanderKernelParams,
    PointMass,
    density_h_c,
    density_h_given_theta,
    density_theta_c,
    density_theta_h,
    density_theta_h_given_c,
    density_x_given_th,
    g_kernel,
    joint_density_theta_h_c,
    joint_density_x_thc,
    marginal_density_h,
    marginal_density_theta,
    meander_reverse_transition,
    meander_transition,
    spliced_density_given_thc,
)
from .errors import CapacityError, DomainError, InsufficientDataError
from .estimator import (
    BinAccumulator,
    BinGrid,
    BinRecord,
    CurveStore,
    RankedBin,
    SimulationResult,
    WorstFitReport,
    accumulate,
    build_quantile_edges,
    conditional_edges_given_close,
    default_close_targets,
    empirical_curve,
    mse_rank,
    run_simulation,
    time_avg_variance,
)
from .moments import (
    MomentCurve,
    MomentPair,
    appendix_integral,
    b1_moments_given_theta,
    cond_moments_given_c_theta_h,
    cond_moments_given_theta,
    cond_moments_given_theta_h,
    curve_given_c_theta_h,
    curve_given_theta,
    curve_given_theta_h,
    g11,
    meander_m1,
    meander_m2,
    meander_var,
)
from .sampler import (
    Path,
    PathSummary,
    RandomSource,
    SimulationConfig,
    sample_bridge_max,
    sample_meander_marginal,
    sample_path_block,
    sample_standard_path,
    sample_theta_m_b1,
    shift_block,
    shift_to_close,
    summarize,
    summarize_block,
)

__version__ = "0.1.0"
