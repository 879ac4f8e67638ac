"""Core data types shared by the calibration engine, baselines, and harness.

All types validate on construction and are immutable afterwards, so they can
be shared freely across threads or worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .calibration import Surface

UCB_KINDS = ("clt", "hoeffding", "bernstein", "betting")
GRID_MODES = ("uniform", "from_scores", "explicit")

DEFAULT_CELL_BUDGET = 10**6
DEFAULT_BETTING_GRID_SIZE = 1000


class ValidationError(ValueError):
    """A record, ladder, or configuration violates a structural invariant."""


@dataclass(frozen=True)
class SourceSpec:
    name: str
    is_ground_truth: bool = False


@dataclass(frozen=True)
class SourceLadder:
    """Ordered annotation sources, cheapest first; the last is ground truth.

    The ground-truth source (typically a human expert) incurs zero loss by
    definition, so every loss vector's last entry is 0.
    """

    sources: tuple[SourceSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sources", tuple(self.sources))
        if len(self.sources) < 2:
            raise ValidationError("ladder must contain at least 2 sources")
        for i, src in enumerate(self.sources):
            expected = i == len(self.sources) - 1
            if src.is_ground_truth != expected:
                raise ValidationError(
                    "exactly the last source must have is_ground_truth=True"
                )

    @property
    def num_sources(self) -> int:
        return len(self.sources)

    @classmethod
    def default(cls, num_sources: int) -> "SourceLadder":
        """Ladder with generic model names and a final 'human' source."""
        if num_sources < 2:
            raise ValidationError("ladder must contain at least 2 sources")
        models = tuple(
            SourceSpec(f"model_{k}") for k in range(num_sources - 1)
        )
        return cls(models + (SourceSpec("human", is_ground_truth=True),))


@dataclass(frozen=True)
class AnnotationRecord:
    """One input: uncertainty score plus per-source losses and costs.

    ``losses[k]`` is the loss incurred if source ``k`` annotates the input
    (last entry belongs to the ground-truth source and must be 0).
    ``costs[k]`` is what source ``k`` charges.  ``query_mask`` and
    ``query_prob`` record whether the ground truth was queried during
    calibration and with what probability; both are optional outside the
    calibration protocol.

    Construction only normalizes shapes; semantic checks (score range, cost
    ordering, loss bound) live in :func:`validate_record` so that malformed
    inputs can be diagnosed against a specific ladder and loss bound.
    """

    id: str
    score: float
    losses: tuple[float, ...]
    costs: tuple[float, ...]
    query_mask: int | None = None
    query_prob: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "losses", tuple(float(x) for x in self.losses))
        object.__setattr__(self, "costs", tuple(float(x) for x in self.costs))
        if len(self.losses) != len(self.costs):
            raise ValidationError(
                f"record {self.id!r}: losses length {len(self.losses)} != "
                f"costs length {len(self.costs)}"
            )
        if len(self.losses) < 2:
            raise ValidationError(
                f"record {self.id!r}: need at least 2 sources, got {len(self.losses)}"
            )
        if self.query_mask is not None:
            if self.query_mask not in (0, 1):
                raise ValidationError(
                    f"record {self.id!r}: query_mask must be 0 or 1"
                )
            object.__setattr__(self, "query_mask", int(self.query_mask))
            if self.query_prob is None:
                raise ValidationError(
                    f"record {self.id!r}: query_mask set without query_prob"
                )
        if self.query_prob is not None:
            p = float(self.query_prob)
            if not 0.0 < p <= 1.0:
                raise ValidationError(
                    f"record {self.id!r}: query_prob must be in (0, 1], got {p}"
                )
            object.__setattr__(self, "query_prob", p)

    @property
    def num_sources(self) -> int:
        return len(self.losses)


def validate_record(
    record: AnnotationRecord, ladder: SourceLadder, bound: float
) -> AnnotationRecord:
    """Check every record invariant against a ladder and loss bound.

    Returns the record unchanged if it is valid, otherwise raises
    :class:`ValidationError` naming the violated invariant.
    """
    k = ladder.num_sources
    if record.num_sources != k:
        raise ValidationError(
            f"record {record.id!r}: dimension mismatch, expected {k} sources, "
            f"got {record.num_sources}"
        )
    if not 0.0 <= record.score <= 1.0:
        raise ValidationError(
            f"record {record.id!r}: score out of range [0, 1]: {record.score}"
        )
    for i, loss in enumerate(record.losses):
        if loss < 0.0:
            raise ValidationError(
                f"record {record.id!r}: negative loss at source {i}: {loss}"
            )
        if loss > bound:
            raise ValidationError(
                f"record {record.id!r}: loss above bound {bound} at source {i}: {loss}"
            )
    if record.losses[-1] != 0.0:
        raise ValidationError(
            f"record {record.id!r}: nonzero ground-truth loss: {record.losses[-1]}"
        )
    prev = 0.0
    for i, cost in enumerate(record.costs):
        if cost <= 0.0:
            raise ValidationError(
                f"record {record.id!r}: non-positive cost at source {i}: {cost}"
            )
        if cost < prev:
            raise ValidationError(
                f"record {record.id!r}: cost ordering violated at source {i}: "
                f"{cost} < {prev}"
            )
        prev = cost
    return record


@dataclass(frozen=True)
class ThresholdVector:
    """K-1 non-decreasing routing thresholds in [0, 1].

    An unsorted input is rejected outright, never silently sorted.
    """

    u: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        if len(self.u) < 1:
            raise ValidationError("threshold vector must have at least one entry")
        prev = 0.0
        for i, val in enumerate(self.u):
            if not 0.0 <= val <= 1.0:
                raise ValidationError(f"threshold {i} out of [0, 1]: {val}")
            if val < prev:
                raise ValidationError(
                    f"thresholds not non-decreasing at index {i}: {val} < {prev}"
                )
            prev = val

    @property
    def num_sources(self) -> int:
        return len(self.u) + 1

    @classmethod
    def zeros(cls, num_sources: int) -> "ThresholdVector":
        return cls((0.0,) * (num_sources - 1))


@dataclass(frozen=True)
class GridSpec:
    """How to realize the threshold grid.

    mode 'uniform' needs ``step`` in (0, 1]; 'explicit' needs ``values`` in
    [0, 1]; 'from_scores' derives the grid from the calibration scores.  The
    realized grid always contains 0 and 1.
    """

    mode: str = "from_scores"
    step: float | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in GRID_MODES:
            raise ValidationError(
                f"grid mode must be one of {GRID_MODES}, got {self.mode!r}"
            )
        if self.mode == "uniform":
            if self.step is None or not 0.0 < float(self.step) <= 1.0:
                raise ValidationError(
                    f"uniform grid needs step in (0, 1], got {self.step}"
                )
            object.__setattr__(self, "step", float(self.step))
        if self.mode == "explicit":
            if self.values is None or len(self.values) == 0:
                raise ValidationError("explicit grid needs values")
            vals = tuple(float(v) for v in self.values)
            for v in vals:
                if not 0.0 <= v <= 1.0:
                    raise ValidationError(f"explicit grid value out of [0, 1]: {v}")
            object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class CalibrationConfig:
    """Knobs for one calibration run.

    epsilon is the target risk level, alpha the tolerated failure probability
    over the calibration draw, query_prob the ground-truth sampling rate,
    loss_bound the a-priori upper bound on any loss value.  The betting
    bound's candidate grid size and its lambda-schedule variant are exposed
    because the construction leaves them open.
    """

    epsilon: float = 0.05
    alpha: float = 0.05
    query_prob: float = 0.9
    loss_bound: float = 1.0
    grid: GridSpec = GridSpec()
    ucb_kind: str = "clt"
    seed: int = 42
    cell_budget: int = DEFAULT_CELL_BUDGET
    betting_grid_size: int = DEFAULT_BETTING_GRID_SIZE
    betting_lambda_running_t: bool = False

    def __post_init__(self) -> None:
        # endpoints are degenerate (0: nothing ever feasible unless all
        # weighted losses vanish; 1: everything feasible) but well-defined
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.query_prob <= 1.0:
            raise ValidationError(
                f"query_prob must be in (0, 1], got {self.query_prob}"
            )
        if self.loss_bound <= 0.0:
            raise ValidationError(
                f"loss_bound must be positive, got {self.loss_bound}"
            )
        if self.ucb_kind not in UCB_KINDS:
            raise ValidationError(
                f"ucb_kind must be one of {UCB_KINDS}, got {self.ucb_kind!r}"
            )
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")
        if self.cell_budget < 1:
            raise ValidationError("cell_budget must be positive")
        if self.betting_grid_size < 2:
            raise ValidationError("betting_grid_size must be at least 2")


@dataclass(frozen=True)
class CalibrationOutcome:
    """Result of one calibration: chosen thresholds plus selection diagnostics.

    When no grid cell satisfies the risk constraint, ``fallback_used`` is set
    and the thresholds are all zeros (every positive-score input goes to the
    ground-truth source); ``ucb_at_selection`` and ``empirical_cost`` then
    describe the all-zeros cell.  ``n_queried`` counts calibration-phase
    ground-truth queries; they are reported but never folded into deployment
    cost metrics.
    """

    thresholds: ThresholdVector
    feasible_count: int
    ucb_at_selection: float
    empirical_cost: float
    fallback_used: bool
    n_queried: int = 0
    diagnostics: "Surface | None" = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.fallback_used and any(v != 0.0 for v in self.thresholds.u):
            raise ValidationError(
                "fallback outcome must carry the all-zeros threshold vector"
            )
