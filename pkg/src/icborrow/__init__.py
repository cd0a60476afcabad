"""Quantitative adverse-event signal detection with similarity-informed
Bayesian borrowing.

Submodule map:

- ``ontology``: concept graph, intrinsic information content, term similarity
- ``reports``: spontaneous reports, cumulative 2x2 contingency tables
- ``ic``: Monte Carlo posterior of the information component
- ``borrow``: neighbor pooling, robust mixture prior, conjugate update
- ``pipeline``: seeded batch screening across quarters and methods
- ``evaluate``: reference-set scoring, comparisons, bootstrap, sweeps
- ``synth``: ground-truth synthetic data generation
- ``cli``: the ``icborrow`` command
"""

from ._version import __version__
from .borrow import (
    BorrowSource,
    MapPrior,
    MixturePosterior,
    RobustPrior,
    WeightPolicy,
    borrow,
    fixed_effect_map,
    mixture_posterior,
    random_effects_map,
    reml_tau2,
    robustify,
)
from .errors import CycleError, NumericalError, ValidationError
from .evaluate import (
    Comparison,
    MetricsReport,
    ReferenceEntry,
    bootstrap,
    check_negative_controls,
    compare_methods,
    load_reference,
    parameter_sweep,
    quarterly_curves,
    score,
)
from .ic import DirichletPrior, IcPosterior, default_prior, posterior_ic, signal_flag
from .ontology import Ontology, SimilarityMatrix, build_similarity, load_ontology
from .pipeline import (
    METHOD_HLGT,
    METHOD_IC,
    METHOD_SSM,
    PairResult,
    RunConfig,
    RunContext,
    run_batch,
    run_quarters,
)
from .quarters import Quarter, quarter_range
from .reports import ContingencyTable, Report, ReportStore, load_reports
from .synth import (
    ClusterSpec,
    PlantedSignal,
    Scenario,
    basic_scenario,
    concordant_scenario,
    discordant_scenario,
    generate,
    null_scenario,
    verify_manifest,
)

__all__ = [
    "__version__",
    "BorrowSource",
    "ClusterSpec",
    "Comparison",
    "ContingencyTable",
    "CycleError",
    "DirichletPrior",
    "IcPosterior",
    "MapPrior",
    "MetricsReport",
    "METHOD_HLGT",
    "METHOD_IC",
    "METHOD_SSM",
    "MixturePosterior",
    "NumericalError",
    "Ontology",
    "PairResult",
    "PlantedSignal",
    "Quarter",
    "ReferenceEntry",
    "Report",
    "ReportStore",
    "RobustPrior",
    "RunConfig",
    "RunContext",
    "Scenario",
    "SimilarityMatrix",
    "ValidationError",
    "WeightPolicy",
    "basic_scenario",
    "bootstrap",
    "borrow",
    "build_similarity",
    "concordant_scenario",
    "check_negative_controls",
    "compare_methods",
    "default_prior",
    "discordant_scenario",
    "fixed_effect_map",
    "generate",
    "null_scenario",
    "load_ontology",
    "load_reference",
    "load_reports",
    "mixture_posterior",
    "parameter_sweep",
    "posterior_ic",
    "quarter_range",
    "quarterly_curves",
    "random_effects_map",
    "reml_tau2",
    "robustify",
    "run_batch",
    "run_quarters",
    "score",
    "signal_flag",
    "verify_manifest",
]
