"""Calibrated routing of annotation work across cost-ordered sources.

Given per-input uncertainty scores and per-source losses and costs, the
package calibrates routing thresholds so that, with probability at least
1 - alpha over the calibration draw, the expected annotation error stays
below epsilon while the expected cost is minimized over the feasible
threshold grid.  A Monte Carlo harness certifies the guarantee, the cost
optimality, and the monotonicity structure on synthetic scenarios.
"""

from .model import (
    AnnotationRecord,
    CalibrationConfig,
    CalibrationOutcome,
    GridSpec,
    SourceLadder,
    SourceSpec,
    ThresholdVector,
    ValidationError,
    validate_record,
)
from .routing import (
    RoutingDecision,
    cost_of,
    cost_savings,
    empirical_cost,
    empirical_risk,
    route,
)
from .estimation import (
    MaskedCalibrationSet,
    apply_query_mask,
    importance_weighted_risk,
    weighted_losses,
    weighted_std,
)
from .bounds import (
    UcbInput,
    compute_ucb,
    normal_quantile,
    ucb_bernstein,
    ucb_betting,
    ucb_clt,
    ucb_hoeffding,
)
from .calibration import (
    CellBudgetError,
    Surface,
    build_grid,
    calibrate,
    deploy,
    select_thresholds,
    ucb_surface,
)
from .baselines import coannotating_select, pac_labeling_calibrate
from .harness import (
    BoundCheckReport,
    ComparisonReport,
    CoverageReport,
    SyntheticScenario,
    adversarial_scenario,
    brute_force_optimal,
    default_scenario,
    empirical_bound_check,
    generate,
    method_comparison,
    monotonicity_check,
    pac_coverage_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "BoundCheckReport",
    "CalibrationConfig",
    "CalibrationOutcome",
    "CellBudgetError",
    "ComparisonReport",
    "CoverageReport",
    "GridSpec",
    "MaskedCalibrationSet",
    "RoutingDecision",
    "SourceLadder",
    "SourceSpec",
    "Surface",
    "SyntheticScenario",
    "ThresholdVector",
    "UcbInput",
    "ValidationError",
    "adversarial_scenario",
    "apply_query_mask",
    "brute_force_optimal",
    "build_grid",
    "default_scenario",
    "calibrate",
    "coannotating_select",
    "compute_ucb",
    "cost_of",
    "cost_savings",
    "deploy",
    "empirical_bound_check",
    "empirical_cost",
    "empirical_risk",
    "generate",
    "importance_weighted_risk",
    "method_comparison",
    "monotonicity_check",
    "normal_quantile",
    "pac_coverage_experiment",
    "pac_labeling_calibrate",
    "route",
    "select_thresholds",
    "ucb_bernstein",
    "ucb_betting",
    "ucb_clt",
    "ucb_hoeffding",
    "ucb_surface",
    "validate_record",
    "weighted_losses",
    "weighted_std",
]
