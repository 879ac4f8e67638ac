"""Reference threshold selectors for head-to-head harness comparisons.

Two selectors: a single-threshold calibrator for a two-source ladder that
takes the largest threshold whose UCB clears the target, and a heuristic
that constrains only the plain empirical risk of the fully-labeled
calibration set (no confidence margin, hence no coverage guarantee).  The
heuristic's published form breaks out of its inner search early; the scan
here covers the full grid, which is equivalent on monotone instances and
well-defined on the rest.
"""

from __future__ import annotations

import math

import numpy as np

from .calibration import build_grid, build_masked_set, ucb_surface
from .model import (
    AnnotationRecord,
    CalibrationConfig,
    CalibrationOutcome,
    SourceLadder,
    ThresholdVector,
    ValidationError,
    validate_record,
)
from itertools import combinations_with_replacement

from .routing import route_scores

METHODS = ("hypac", "pac-labeling", "coannotating")


def pac_labeling_calibrate(
    records: list[AnnotationRecord],
    ladder: SourceLadder,
    config: CalibrationConfig,
) -> CalibrationOutcome:
    """Largest single threshold whose UCB clears epsilon (two-source ladder).

    Under cost ordering this coincides with the cheapest feasible cell, so
    the result matches the full engine restricted to two sources.
    """
    if ladder.num_sources != 2:
        raise ValidationError(
            f"pac-labeling needs exactly 2 sources, got {ladder.num_sources}"
        )
    if len(records) < 2:
        raise ValidationError("calibration needs at least 2 records")
    for r in records:
        validate_record(r, ladder, config.loss_bound)
    cal = build_masked_set(records, config)
    grid = build_grid(config.grid, scores=[r.score for r in records])
    surface = ucb_surface(cal, grid, 2, config)
    feasible = np.flatnonzero(surface.ucb <= config.epsilon)
    if feasible.size == 0:
        return CalibrationOutcome(
            thresholds=ThresholdVector.zeros(2),
            feasible_count=0,
            ucb_at_selection=float(surface.ucb[0]),
            empirical_cost=float(surface.cost[0]),
            fallback_used=True,
            n_queried=cal.n_queried,
        )
    # cells are 1-tuples in ascending grid order, so the last feasible
    # index is the maximal feasible threshold
    best = int(feasible[-1])
    return CalibrationOutcome(
        thresholds=ThresholdVector(surface.cells[best]),
        feasible_count=int(feasible.size),
        ucb_at_selection=float(surface.ucb[best]),
        empirical_cost=float(surface.cost[best]),
        fallback_used=False,
        n_queried=cal.n_queried,
    )


def coannotating_select(
    records: list[AnnotationRecord],
    ladder: SourceLadder,
    epsilon: float,
    grid: np.ndarray,
) -> ThresholdVector:
    """Cheapest cell whose plain calibration risk is at most epsilon.

    Uses the full (unmasked) loss vectors and no confidence margin.  The
    published form is the two-threshold (three-source) case; the scan is
    written for any ladder length.  Falls back to all zeros when no cell
    qualifies.
    """
    if not records:
        raise ValidationError("coannotating needs a non-empty record list")
    for r in records:
        validate_record(r, ladder, math.inf)
    k = ladder.num_sources
    scores = np.array([r.score for r in records])
    losses = np.array([r.losses for r in records])
    costs = np.array([r.costs for r in records])
    rows = np.arange(len(records))
    best_cell: tuple[float, ...] | None = None
    best_key: tuple | None = None
    for cell in combinations_with_replacement(np.asarray(grid).tolist(), k - 1):
        tv = ThresholdVector(cell)
        src = route_scores(tv, scores)
        risk = float(np.mean(losses[rows, src]))
        if risk > epsilon:
            continue
        cost = float(np.mean(costs[rows, src]))
        key = (cost, tuple(-v for v in reversed(cell)))
        if best_key is None or key < best_key:
            best_key = key
            best_cell = cell
    if best_cell is None:
        return ThresholdVector.zeros(k)
    return ThresholdVector(best_cell)
