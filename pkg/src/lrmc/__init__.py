"""Identifiability and completion of low-rank matrices observed on
deterministic patterns: generic rank bounds, well-posedness certificates,
exact and least-squares completion, and chi-square rank selection.
"""

from .geometry import (
    CharRankResult,
    Complements,
    TangentBasis,
    WellPosednessReport,
    characteristic_rank,
    complements,
    jacobian,
    normal_space_basis,
    project_tangent,
    tangent_basis,
    wellposedness_check,
)
from .harness import (
    ExperimentResult,
    Instance,
    InstanceSpec,
    gen_instance,
    mse_compare,
    qq_data,
    rank_selection_compare,
    resample_until_wellposed,
    wellposed_probability,
    wilson_fixture,
)
from .patterns import (
    GenericBounds,
    ObservationPattern,
    ObservedMatrix,
    ReducibilityReport,
    estimated_bound,
    generic_bound,
    generic_bound_dims,
    is_reducible,
    min_count_check,
    mrfa_bound,
    row_col_counts,
)
from .solvers import (
    SolveResult,
    SolverConfig,
    lrma_fixed_rank,
    nuclear_norm_complete,
    optimality_residual,
    rank_from_singular_values,
    rank_one_complete,
    schur_cascade,
    schur_complete_entry,
)
from .stats import (
    NoiseModel,
    RankTestReport,
    RankTestRow,
    chi2_cdf,
    chi2_quantile,
    degrees_of_freedom,
    nested_test,
    noise_from_replications,
    noncentrality,
    sequential_rank_test,
    tangent_statistic,
    test_statistic,
)

__version__ = "0.1.0"

__all__ = [
    "CharRankResult", "Complements", "TangentBasis", "WellPosednessReport",
    "characteristic_rank", "complements", "jacobian", "normal_space_basis",
    "project_tangent", "tangent_basis", "wellposedness_check",
    "ExperimentResult", "Instance", "InstanceSpec", "gen_instance",
    "mse_compare", "qq_data", "rank_selection_compare",
    "resample_until_wellposed", "wellposed_probability", "wilson_fixture",
    "GenericBounds", "ObservationPattern", "ObservedMatrix",
    "ReducibilityReport", "estimated_bound", "generic_bound",
    "generic_bound_dims", "is_reducible", "min_count_check", "mrfa_bound",
    "row_col_counts",
    "SolveResult", "SolverConfig", "lrma_fixed_rank", "nuclear_norm_complete",
    "optimality_residual", "rank_from_singular_values", "rank_one_complete",
    "schur_cascade", "schur_complete_entry",
    "NoiseModel", "RankTestReport", "RankTestRow", "chi2_cdf", "chi2_quantile",
    "degrees_of_freedom", "nested_test", "noise_from_replications",
    "noncentrality", "sequential_rank_test", "tangent_statistic",
    "test_statistic",
    "__version__",
]
