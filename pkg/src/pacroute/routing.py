"""Routing rule, per-input cost, and empirical risk/cost/savings aggregates.

The routing rule partitions the unit score interval into left-closed bands:
an input with score s goes to the smallest source k with s <= u[k], and to
the last (ground-truth) source when s exceeds every threshold.  A score
exactly equal to a threshold therefore routes to the cheaper side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AnnotationRecord, ThresholdVector


@dataclass(frozen=True)
class RoutingDecision:
    source_index: int
    cost: float
    loss: float


def route(thresholds: ThresholdVector, score: float) -> int:
    """Source index for one score: smallest k with score <= u[k], else K-1."""
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score out of range [0, 1]: {score}")
    for k, bound in enumerate(thresholds.u):
        if score <= bound:
            return k
    return len(thresholds.u)


def route_scores(thresholds: ThresholdVector, scores: np.ndarray) -> np.ndarray:
    """Vectorized :func:`route` over an array of scores.

    Thresholds are non-decreasing, so the smallest k with u[k] >= score is a
    left-sided insertion index.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size and (scores.min() < 0.0 or scores.max() > 1.0):
        raise ValueError("score out of range [0, 1]")
    return np.searchsorted(np.asarray(thresholds.u), scores, side="left")


def decide(thresholds: ThresholdVector, record: AnnotationRecord) -> RoutingDecision:
    k = route(thresholds, record.score)
    return RoutingDecision(k, record.costs[k], record.losses[k])


def cost_of(thresholds: ThresholdVector, record: AnnotationRecord) -> float:
    """Cost charged by the source this record routes to."""
    return record.costs[route(thresholds, record.score)]


def empirical_cost(
    thresholds: ThresholdVector, records: list[AnnotationRecord]
) -> float:
    """Mean routed cost over a record set."""
    if not records:
        raise ValueError("empirical_cost needs a non-empty record list")
    return float(np.mean([cost_of(thresholds, r) for r in records]))


def empirical_risk(
    thresholds: ThresholdVector, records: list[AnnotationRecord]
) -> float:
    """Mean routed loss over a record set (ground-truth routing counts as 0)."""
    if not records:
        raise ValueError("empirical_risk needs a non-empty record list")
    return float(
        np.mean([r.losses[route(thresholds, r.score)] for r in records])
    )


def cost_savings(
    thresholds: ThresholdVector, records: list[AnnotationRecord]
) -> float:
    """Percent cost reduction relative to sending everything to ground truth.

    May be negative when compared across datasets or ladders; zero when every
    record routes to the ground-truth source.
    """
    if not records:
        raise ValueError("cost_savings needs a non-empty record list")
    total_human = sum(r.costs[-1] for r in records)
    if total_human <= 0.0:
        raise ValueError("total ground-truth cost must be positive")
    total_routed = sum(cost_of(thresholds, r) for r in records)
    return (1.0 - total_routed / total_human) * 100.0
