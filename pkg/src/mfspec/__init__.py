"""Multifractal spectral-dimension toolkit for dyadic measures."""

from .cubes import DyadicCube
from .measures import (
    BlockSchedule,
    CascadeMeasure,
    ConstantSchedule,
    MeasureModel,
    PeriodicSchedule,
    PowerLawDensity,
    ProductMeasure,
    SequenceSchedule,
    build_block_cascade,
    lebesgue,
)
from .densities import CuspMeasure, RadialProfile, cusp_measure
from .registry import catalog, get_measure
from .setfun import (
    EnumerationBudgetError,
    EvaluatedCube,
    RefusalError,
    SetFunction,
    enumerate_support,
    set_function_eval,
    value_histogram,
)
from .spectra import (
    DimensionSummary,
    KappaEstimate,
    PartitionFunctionCurve,
    compute_curve,
    dim_infty,
    dimension_bounds,
    kappa_estimate,
    q_zero,
    q_zero_parametrized_t,
    set_function_dim_infty,
    subdifferential_bound,
    tau_n,
)
from .partitions import (
    Partition,
    PartitionDepthError,
    RefinementTrace,
    bs_refine,
    gamma_n,
    partition_count,
    stopping_count,
    stopping_partition,
)
from .coarse import (
    CoarseDimension,
    CoarseProfile,
    coarse_dimension,
    coarse_profile,
    per_level_zeros,
    tilted_diagnostic,
)
from .eigen import (
    DiscretePencil,
    EigenResult,
    ModeComparison,
    assemble,
    compare_modes,
    eigencount,
    fit_spectral_dimension,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    build_measure,
    build_set_function,
    load_config,
    parse_config,
    serialize_measure,
)
from .report import RunResult, check_report, recompute_checks, run

__version__ = "0.1.0"

__all__ = [
    "DyadicCube",
    "MeasureModel",
    "CascadeMeasure",
    "ProductMeasure",
    "ConstantSchedule",
    "SequenceSchedule",
    "PeriodicSchedule",
    "BlockSchedule",
    "PowerLawDensity",
    "build_block_cascade",
    "lebesgue",
    "CuspMeasure",
    "RadialProfile",
    "cusp_measure",
    "catalog",
    "get_measure",
    "SetFunction",
    "EvaluatedCube",
    "RefusalError",
    "EnumerationBudgetError",
    "enumerate_support",
    "set_function_eval",
    "value_histogram",
    "tau_n",
    "compute_curve",
    "PartitionFunctionCurve",
    "q_zero",
    "q_zero_parametrized_t",
    "dim_infty",
    "set_function_dim_infty",
    "dimension_bounds",
    "DimensionSummary",
    "subdifferential_bound",
    "kappa_estimate",
    "KappaEstimate",
    "Partition",
    "PartitionDepthError",
    "RefinementTrace",
    "stopping_partition",
    "stopping_count",
    "partition_count",
    "gamma_n",
    "bs_refine",
    "CoarseProfile",
    "CoarseDimension",
    "coarse_profile",
    "coarse_dimension",
    "per_level_zeros",
    "tilted_diagnostic",
    "DiscretePencil",
    "EigenResult",
    "ModeComparison",
    "assemble",
    "eigencount",
    "compare_modes",
    "fit_spectral_dimension",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "build_measure",
    "build_set_function",
    "serialize_measure",
    "RunResult",
    "run",
    "check_report",
    "recompute_checks",
    "__version__",
]
