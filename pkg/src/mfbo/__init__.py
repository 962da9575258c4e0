"""Multifidelity Bayesian optimization toolkit and benchmark harness.

Core entry points:

- :func:`mfbo.fit_gp` / :func:`mfbo.fit_mf_gp` fit surrogates.
- Acquisition scores and maximizers live in :mod:`mfbo.acquisition`
  and :mod:`mfbo.acquisition_mf`.
- :class:`mfbo.ExperimentConfig` plus :func:`mfbo.run_experiment`
  run the benchmark protocol; :mod:`mfbo.cli` is the command line.
- The HTTP layer is under :mod:`mfbo.service` (imported on demand).
"""

from ._version import __version__
from .acquisition import (
    Incumbent,
    MesSettings,
    expected_improvement,
    max_value_entropy_search,
    maximize_acquisition,
    probability_of_improvement,
    sample_min_values,
)
from .acquisition_mf import (
    CostSchedule,
    MfRecommendation,
    maximize_mf_acquisition,
    mf_expected_improvement,
    mf_max_value_entropy_search,
    mf_probability_of_improvement,
    sample_reference_min_values,
)
from .benchmarks import FidelityFamily, OptimumRecord, lookup, registry
from .dataset import ObservationSet
from .engine import (
    ExperimentConfig,
    ResolvedExperiment,
    TrialRecord,
    TrialTrace,
    config_from_manifest,
    run_trial,
)
from .errors import (
    BudgetExhausted,
    ConfigError,
    DegenerateData,
    DimensionMismatch,
    EmptyInput,
    IoFailure,
    LevelOutOfRange,
    MfboError,
    NotPositiveDefinite,
    OutOfDomain,
    UnknownAcquisition,
    UnknownBenchmark,
)
from .gp import GpPosterior, KernelParams, fit_gp, log_marginal_likelihood
from .harness import (
    ExperimentResult,
    SuiteSpec,
    VerifyResult,
    parse_suite_config,
    run_experiment,
    run_suite,
    summary_table,
    verify_registry,
)
from .metrics import (
    AggregateCurve,
    MetricPoint,
    aggregate,
    compute_metrics,
    emit,
    read_aggregate,
    read_manifest,
)
from .mfgp import MfGpPosterior, MfKernelParams, fit_mf_gp, posterior_correlation
from .numerics import RandomStream, latin_hypercube

__all__ = [
    "__version__",
    "AggregateCurve",
    "BudgetExhausted",
    "ConfigError",
    "CostSchedule",
    "DegenerateData",
    "DimensionMismatch",
    "EmptyInput",
    "ExperimentConfig",
    "ExperimentResult",
    "FidelityFamily",
    "GpPosterior",
    "Incumbent",
    "IoFailure",
    "KernelParams",
    "LevelOutOfRange",
    "MesSettings",
    "MetricPoint",
    "MfGpPosterior",
    "MfKernelParams",
    "MfRecommendation",
    "MfboError",
    "NotPositiveDefinite",
    "ObservationSet",
    "OptimumRecord",
    "OutOfDomain",
    "RandomStream",
    "ResolvedExperiment",
    "SuiteSpec",
    "TrialRecord",
    "TrialTrace",
    "UnknownAcquisition",
    "UnknownBenchmark",
    "VerifyResult",
    "aggregate",
    "compute_metrics",
    "config_from_manifest",
    "emit",
    "expected_improvement",
    "fit_gp",
    "fit_mf_gp",
    "latin_hypercube",
    "log_marginal_likelihood",
    "lookup",
    "max_value_entropy_search",
    "maximize_acquisition",
    "maximize_mf_acquisition",
    "mf_expected_improvement",
    "mf_max_value_entropy_search",
    "mf_probability_of_improvement",
    "parse_suite_config",
    "posterior_correlation",
    "probability_of_improvement",
    "read_aggregate",
    "read_manifest",
    "registry",
    "run_experiment",
    "run_suite",
    "run_trial",
    "sample_min_values",
    "sample_reference_min_values",
    "summary_table",
    "verify_registry",
]
