"""Ground-truth query protocol and the importance-weighted risk estimator.

During calibration each record's ground truth is queried independently with
probability p_i; the indicator Z_i records the flip.  The weighted losses
W_i = (Z_i / p_i) * loss(routed source) yield an unbiased risk estimate no
matter which thresholds are evaluated, because the mask is drawn once,
before any threshold is considered.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import AnnotationRecord, ThresholdVector, ValidationError
from .routing import route_scores


@dataclass(frozen=True)
class MaskedCalibrationSet:
    """Calibration records with query masks, plus cached column arrays.

    Records with Z_i = 0 still carry loss vectors in memory (the file format
    keeps them so that harnesses can score against the truth), but estimators
    never read a loss unless the record's mask is 1.
    """

    records: tuple[AnnotationRecord, ...]
    scores: np.ndarray = field(init=False, repr=False, compare=False)
    losses: np.ndarray = field(init=False, repr=False, compare=False)
    costs: np.ndarray = field(init=False, repr=False, compare=False)
    mask: np.ndarray = field(init=False, repr=False, compare=False)
    probs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if len(self.records) < 2:
            raise ValidationError("calibration set needs at least 2 records")
        for r in self.records:
            if r.query_mask is None or r.query_prob is None:
                raise ValidationError(
                    f"record {r.id!r} is missing query_mask/query_prob"
                )
        object.__setattr__(
            self, "scores", np.array([r.score for r in self.records])
        )
        object.__setattr__(
            self, "losses", np.array([r.losses for r in self.records])
        )
        object.__setattr__(
            self, "costs", np.array([r.costs for r in self.records])
        )
        object.__setattr__(
            self,
            "mask",
            np.array([r.query_mask for r in self.records], dtype=np.int64),
        )
        object.__setattr__(
            self, "probs", np.array([r.query_prob for r in self.records])
        )

    @property
    def m(self) -> int:
        return len(self.records)

    @property
    def num_sources(self) -> int:
        return self.records[0].num_sources

    @property
    def n_queried(self) -> int:
        return int(self.mask.sum())

    @property
    def min_query_prob(self) -> float:
        """Most conservative per-record query probability.

        Range-based bounds need a single p such that W_i <= B / p; with
        heterogeneous p_i the minimum is the valid choice.
        """
        return float(self.probs.min())


def apply_query_mask(
    records: list[AnnotationRecord], p: float, seed: int
) -> MaskedCalibrationSet:
    """Draw one independent Bernoulli(p) query flag per record.

    Deterministic for a fixed seed: a dedicated generator is created here and
    consumed in record order, so no global RNG state is involved.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"query probability must be in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    draws = rng.random(len(records))
    masked = tuple(
        replace(r, query_mask=int(draws[i] < p), query_prob=p)
        for i, r in enumerate(records)
    )
    return MaskedCalibrationSet(masked)


def weighted_losses(
    cal: MaskedCalibrationSet, thresholds: ThresholdVector
) -> np.ndarray:
    """Per-record W_i = (Z_i / p_i) * loss(routed source), zero when Z_i = 0.

    Losses of unqueried records are never touched: the mask selects rows
    first, then routing indexes into the loss table for those rows only.
    """
    w = np.zeros(cal.m)
    queried = np.flatnonzero(cal.mask == 1)
    if queried.size:
        src = route_scores(thresholds, cal.scores[queried])
        w[queried] = cal.losses[queried, src] / cal.probs[queried]
    return w


def importance_weighted_risk(
    cal: MaskedCalibrationSet, thresholds: ThresholdVector
) -> float:
    """Mean of the weighted losses; unbiased for the true routed risk."""
    return float(np.mean(weighted_losses(cal, thresholds)))


def weighted_std(cal: MaskedCalibrationSet, thresholds: ThresholdVector) -> float:
    """Sample standard deviation of the W_i (denominator m - 1)."""
    if cal.m < 2:
        raise ValueError("weighted_std needs at least 2 records")
    return float(np.std(weighted_losses(cal, thresholds), ddof=1))
