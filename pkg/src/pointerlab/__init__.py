"""Pointer-state toolkit for one-dimensional collisional decoherence.

The package splits into a deterministic layer (grids, kernels, nonlinear
flow, soliton analysis), two stochastic layers (wave-function unraveling on
the grid, reduced coefficient process on pointer slots), and an oracle layer
(closed-form dephasing, direct master-equation integration, quantum-jump
Monte Carlo) that shares no evolution code with the samplers it checks.
"""

from .errors import (
    PointerlabError,
    NormError,
    GridError,
    ConfigError,
    DivergenceError,
    FitError,
    JumpUndefinedError,
    UnstableEquilibriumError,
    TimeoutError,
    OracleError,
    SupportError,
    DomainError,
)
from .grids import (
    SpatialGrid,
    ComplexField,
    GridDensityMatrix,
    RngStream,
    normalize,
    gaussian_field,
    spectral_shift,
    circular_mean_position,
)
from .kernels import SimulationParams, MomentumKernel
from .dynamics import (
    EvolutionConfig,
    EvolutionResult,
    estimate_soliton_width,
    estimate_tail_exponent,
    suggest_discretization,
    expectation_values,
    evolve_nonlinear,
    soliton_seed,
    classical_trajectory,
)
from .analysis import (
    SolitonProfile,
    SizeModelParams,
    WidthSweepPoint,
    WidthSweepResult,
    density_width,
    fit_exponential_tail,
    measure_phase_slopes,
    profile_soliton,
    asymptotic_phase_slope,
    point_like_phase_error,
    fit_size_model,
    width_vs_kappa,
)
from .unraveling import (
    JumpEvent,
    UnravelingTrajectory,
    momentum_characteristic,
    total_jump_rate,
    overlap_jump_rate,
    apply_jump,
    metropolis_momentum,
    sample_trajectory,
    sample_ensemble,
    ensemble_density,
)
from .coefficients import (
    CoefficientState,
    TrajectoryOutcome,
    BasinMap,
    saturated_positions,
    localization_rate_matrix,
    coefficient_state,
    coefficient_derivative,
    jump_rate,
    total_rate,
    jump_redistribute,
    simplex_sample,
    n2_analytics,
    sample_coefficient_trajectory,
    sample_coefficient_ensemble,
    basin_map,
)
from .oracles import (
    BlochState,
    Hamiltonian,
    EnsembleComparison,
    dephasing_solution,
    dephasing_pointer_flow,
    pure_density_matrix,
    master_equation_step,
    evolve_master_equation,
    coherence_block_weights,
    qmc_trajectory,
    trace_distance,
    compare_ensemble,
)
from .stats import (
    OutcomeHistogram,
    relative_entropy,
    chi_square_statistic,
    chi_square_quantile,
    binomial_sigma,
)

__version__ = "0.1.0"

__all__ = [
    "PointerlabError", "NormError", "GridError", "ConfigError",
    "DivergenceError", "FitError", "JumpUndefinedError",
    "UnstableEquilibriumError", "TimeoutError", "OracleError",
    "SupportError", "DomainError",
    "SpatialGrid", "ComplexField", "GridDensityMatrix", "RngStream",
    "normalize", "gaussian_field", "spectral_shift", "circular_mean_position",
    "SimulationParams", "MomentumKernel",
    "EvolutionConfig", "EvolutionResult", "estimate_soliton_width",
    "estimate_tail_exponent", "suggest_discretization", "expectation_values",
    "evolve_nonlinear", "soliton_seed", "classical_trajectory",
    "SolitonProfile", "SizeModelParams", "WidthSweepPoint", "WidthSweepResult",
    "density_width", "fit_exponential_tail", "measure_phase_slopes",
    "profile_soliton", "asymptotic_phase_slope", "point_like_phase_error",
    "fit_size_model", "width_vs_kappa",
    "JumpEvent", "UnravelingTrajectory", "momentum_characteristic",
    "total_jump_rate", "overlap_jump_rate", "apply_jump",
    "metropolis_momentum",
    "sample_trajectory", "sample_ensemble", "ensemble_density",
    "CoefficientState", "TrajectoryOutcome", "BasinMap",
    "saturated_positions", "localization_rate_matrix", "coefficient_state",
    "coefficient_derivative", "jump_rate", "total_rate", "jump_redistribute",
    "simplex_sample", "n2_analytics", "sample_coefficient_trajectory",
    "sample_coefficient_ensemble", "basin_map",
    "BlochState", "Hamiltonian", "EnsembleComparison", "dephasing_solution",
    "dephasing_pointer_flow", "pure_density_matrix", "master_equation_step",
    "evolve_master_equation", "coherence_block_weights", "qmc_trajectory",
    "trace_distance", "compare_ensemble",
    "OutcomeHistogram", "relative_entropy", "chi_square_statistic",
    "chi_square_quantile", "binomial_sigma",
    "__version__",
]
