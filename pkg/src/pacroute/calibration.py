"""Calibration engine: threshold grid, UCB surface, and selection.

The engine evaluates every non-decreasing (K-1)-tuple over the realized
grid, bounds the true risk of each with the configured UCB at level alpha
(no multiplicity correction: the nested structure of the risk constraint
makes per-cell level alpha sufficient), and picks the cheapest cell whose
bound clears the target.  Cost ties break toward the lexicographically
largest reversed tuple, i.e. the top threshold is maximized first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from . import bounds
from ._betting_fast import betting_ucb_batch
from .estimation import MaskedCalibrationSet, apply_query_mask, weighted_losses
from .model import (
    AnnotationRecord,
    CalibrationConfig,
    CalibrationOutcome,
    GridSpec,
    SourceLadder,
    ThresholdVector,
    ValidationError,
    validate_record,
)
from .routing import RoutingDecision, decide, route_scores

_BETTING_CHUNK = 4096


class CellBudgetError(RuntimeError):
    """The grid would produce more threshold tuples than the configured budget."""


def build_grid(spec: GridSpec, scores: Sequence[float] | None = None) -> np.ndarray:
    """Realize a grid spec as a sorted, deduplicated array containing 0 and 1."""
    if spec.mode == "uniform":
        step = spec.step
        n = int(math.floor(1.0 / step + 1e-9))
        vals = [i * step for i in range(n + 1) if i * step <= 1.0]
        vals.append(1.0)
    elif spec.mode == "from_scores":
        if scores is None or len(scores) == 0:
            raise ValueError("from_scores grid needs a non-empty score list")
        vals = [float(s) for s in scores]
        vals.extend((0.0, 1.0))
    else:
        vals = list(spec.values) + [0.0, 1.0]
    grid = np.unique(np.asarray(vals, dtype=np.float64))
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValueError("grid values out of [0, 1]")
    return grid


def cell_count(grid_size: int, num_sources: int) -> int:
    """Number of non-decreasing (K-1)-tuples over a grid of the given size."""
    return math.comb(grid_size + num_sources - 2, num_sources - 1)


@dataclass(frozen=True)
class Surface:
    """Per-cell calibration statistics over the whole threshold grid.

    One row per non-decreasing threshold tuple: importance-weighted risk,
    weighted-loss spread, UCB, and empirical cost.
    """

    num_sources: int
    grid: tuple[float, ...]
    cells: tuple[tuple[float, ...], ...]
    r_is: np.ndarray = field(compare=False)
    sigma_w: np.ndarray = field(compare=False)
    ucb: np.ndarray = field(compare=False)
    cost: np.ndarray = field(compare=False)

    def __len__(self) -> int:
        return len(self.cells)


def ucb_surface(
    cal: MaskedCalibrationSet,
    grid: np.ndarray,
    num_sources: int,
    config: CalibrationConfig,
) -> Surface:
    """Evaluate risk estimate, spread, UCB, and cost for every grid cell."""
    n_cells = cell_count(len(grid), num_sources)
    if n_cells > config.cell_budget:
        raise CellBudgetError(
            f"{n_cells} cells exceed the budget of {config.cell_budget}; "
            f"coarsen the grid or raise cell_budget"
        )
    m = cal.m
    p_bound = cal.min_query_prob
    row_idx = np.arange(m)

    cells: list[tuple[float, ...]] = []
    r_is = np.empty(n_cells)
    sigma_w = np.empty(n_cells)
    ucb = np.empty(n_cells)
    cost = np.empty(n_cells)

    betting = config.ucb_kind == "betting"
    w_chunk = np.empty((min(_BETTING_CHUNK, n_cells), m)) if betting else None
    chunk_start = 0
    chunk_fill = 0

    def flush_chunk() -> None:
        nonlocal chunk_start, chunk_fill
        if chunk_fill:
            ucb[chunk_start : chunk_start + chunk_fill] = betting_ucb_batch(
                w_chunk[:chunk_fill],
                config.alpha,
                config.loss_bound,
                p_bound,
                config.betting_grid_size,
                config.betting_lambda_running_t,
            )
            chunk_start += chunk_fill
            chunk_fill = 0

    for i, cell in enumerate(combinations_with_replacement(grid.tolist(), num_sources - 1)):
        tv = ThresholdVector(cell)
        cells.append(tv.u)
        w = weighted_losses(cal, tv)
        r_is[i] = np.mean(w)
        sigma_w[i] = np.std(w, ddof=1)
        src = route_scores(tv, cal.scores)
        cost[i] = np.mean(cal.costs[row_idx, src])
        if betting:
            w_chunk[chunk_fill] = w
            chunk_fill += 1
            if chunk_fill == w_chunk.shape[0]:
                flush_chunk()
        else:
            inp = bounds.UcbInput(w, config.alpha, config.loss_bound, p_bound)
            ucb[i] = bounds.compute_ucb(config.ucb_kind, inp)
    if betting:
        flush_chunk()

    return Surface(
        num_sources=num_sources,
        grid=tuple(grid.tolist()),
        cells=tuple(cells),
        r_is=r_is,
        sigma_w=sigma_w,
        ucb=ucb,
        cost=cost,
    )


def select_thresholds(
    surface: Surface,
    epsilon: float,
    *,
    n_queried: int = 0,
    keep_diagnostics: bool = False,
) -> CalibrationOutcome:
    """Cheapest cell whose UCB clears epsilon; all-zeros fallback otherwise.

    Cost ties break toward the lexicographically largest reversed tuple
    (maximize the top threshold first, then the next one down, and so on).
    """
    if len(surface) == 0:
        raise ValueError("surface has no cells")
    feasible = np.flatnonzero(surface.ucb <= epsilon)
    diag = surface if keep_diagnostics else None
    if feasible.size == 0:
        # the first cell is the all-zeros tuple (the grid always contains 0)
        return CalibrationOutcome(
            thresholds=ThresholdVector.zeros(surface.num_sources),
            feasible_count=0,
            ucb_at_selection=float(surface.ucb[0]),
            empirical_cost=float(surface.cost[0]),
            fallback_used=True,
            n_queried=n_queried,
            diagnostics=diag,
        )
    best = min(
        feasible,
        key=lambda i: (
            surface.cost[i],
            tuple(-v for v in reversed(surface.cells[i])),
        ),
    )
    return CalibrationOutcome(
        thresholds=ThresholdVector(surface.cells[best]),
        feasible_count=int(feasible.size),
        ucb_at_selection=float(surface.ucb[best]),
        empirical_cost=float(surface.cost[best]),
        fallback_used=False,
        n_queried=n_queried,
        diagnostics=diag,
    )


def build_masked_set(
    records: list[AnnotationRecord], config: CalibrationConfig
) -> MaskedCalibrationSet:
    """Use pre-existing query masks if every record carries one, else draw them."""
    with_mask = sum(1 for r in records if r.query_mask is not None)
    if with_mask == len(records):
        return MaskedCalibrationSet(tuple(records))
    if with_mask != 0:
        raise ValidationError(
            "either all calibration records must carry query masks or none"
        )
    return apply_query_mask(records, config.query_prob, config.seed)


def calibrate(
    records: list[AnnotationRecord],
    ladder: SourceLadder,
    config: CalibrationConfig,
    *,
    keep_diagnostics: bool = False,
) -> CalibrationOutcome:
    """Full calibration pass: mask, grid, surface, selection.

    Deterministic given the record order and the config (the mask seed is
    part of the config).
    """
    if len(records) < 2:
        raise ValidationError("calibration needs at least 2 records")
    for r in records:
        validate_record(r, ladder, config.loss_bound)
    cal = build_masked_set(records, config)
    grid = build_grid(config.grid, scores=[r.score for r in records])
    surface = ucb_surface(cal, grid, ladder.num_sources, config)
    return select_thresholds(
        surface,
        config.epsilon,
        n_queried=cal.n_queried,
        keep_diagnostics=keep_diagnostics,
    )


def deploy(
    outcome: CalibrationOutcome, records: list[AnnotationRecord]
) -> list[RoutingDecision]:
    """Route every record with the calibrated thresholds."""
    return [decide(outcome.thresholds, r) for r in records]
