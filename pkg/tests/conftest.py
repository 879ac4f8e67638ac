"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from pacroute import AnnotationRecord


def make_record(
    rid="r0",
    score=0.5,
    losses=(0.0, 0.0, 0.0),
    costs=(1.0, 2.0, 8.0),
    z=None,
    p=None,
):
    return AnnotationRecord(
        id=rid, score=score, losses=losses, costs=costs, query_mask=z, query_prob=p
    )


def random_records(
    rng: np.random.Generator,
    n: int,
    k: int = 3,
    loss_bound: float = 1.0,
    dominance: bool = False,
    binary_losses: bool = False,
    costs: tuple | None = None,
):
    """Random valid records; dominance sorts each loss vector non-increasing."""
    if costs is None:
        base = np.cumsum(rng.random(k) + 0.1)
    else:
        base = np.asarray(costs, dtype=float)
    records = []
    for i in range(n):
        if binary_losses:
            raw = (rng.random(k - 1) < 0.5).astype(float) * loss_bound
        else:
            raw = rng.random(k - 1) * loss_bound
        if dominance:
            raw = np.sort(raw)[::-1]
        records.append(
            AnnotationRecord(
                id=f"r{i}",
                score=float(rng.random()),
                losses=tuple(raw) + (0.0,),
                costs=tuple(base),
            )
        )
    return records


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
