"""Interpretable treatment policies as unions of hyperboxes.

The package learns OR-of-ANDs treatment rules from observational data by
exactly minimizing an off-policy objective with branch-and-price. Lower
outcomes are better everywhere.
"""

from .bnp import BnPConfig, FitResult, NodeRecord, fit
from .cli import (
    PolicyDocument,
    as_policy,
    parse_document,
    render_dot,
    render_grid,
    render_text,
    serialize_document,
)
from .data import (
    DataError,
    Dataset,
    Hyperbox,
    IndexPartition,
    Policy,
    Sample,
    box_contains,
    load_csv,
    partition,
    policy_decide,
    policy_decisions,
    spanned_boxes,
)
from .eval import (
    EvalReport,
    empirical_objective,
    policy_value_mc,
    rademacher_bound,
    regret,
)
from .nuisance import NuisanceModel, exact_nuisance, fit_plugin_nuisance
from .scores import ScoreVector, compute_scores, scale_scores
from .simgen import SCENARIOS, Scenario, generate, optimal_decision, true_mean

__version__ = "0.1.0"

__all__ = [
    "BnPConfig",
    "DataError",
    "Dataset",
    "EvalReport",
    "FitResult",
    "Hyperbox",
    "IndexPartition",
    "NodeRecord",
    "NuisanceModel",
    "Policy",
    "PolicyDocument",
    "SCENARIOS",
    "Sample",
    "Scenario",
    "ScoreVector",
    "as_policy",
    "box_contains",
    "compute_scores",
    "empirical_objective",
    "exact_nuisance",
    "fit",
    "fit_plugin_nuisance",
    "generate",
    "load_csv",
    "optimal_decision",
    "parse_document",
    "partition",
    "policy_decide",
    "policy_decisions",
    "policy_value_mc",
    "rademacher_bound",
    "regret",
    "render_dot",
    "render_grid",
    "render_text",
    "scale_scores",
    "serialize_document",
    "spanned_boxes",
    "true_mean",
    "__version__",
]
