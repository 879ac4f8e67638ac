"""Upper confidence bounds on the true routed risk.

All four constructions bound the mean of the importance-weighted losses
W_i in [0, B/p], where B bounds the raw losses and p is the ground-truth
query probability:

* clt       -- mean(W) + z_{1-alpha} * std(W) / sqrt(m); asymptotic only.
* hoeffding -- mean(W) + (B / (p * sqrt(2m))) * sqrt(log(1/alpha)).
* bernstein -- mean(W) + sqrt(2 * V * log(2/alpha) / m)
               + 7 * B * log(2/alpha) / (3 * (m-1) * p), V the sample
               variance; tighter than hoeffding at small variance.
* betting   -- supremum of the candidate means a capped betting
               supermartingale fails to refute at level alpha, on the
               p/B-normalized observations; finite-sample valid and
               typically the tightest.

The betting construction is sequence-dependent by design; callers must fix
the record order before evaluating it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .model import DEFAULT_BETTING_GRID_SIZE


@dataclass(frozen=True)
class UcbInput:
    """Weighted losses plus the constants every bound construction needs.

    ``query_prob`` is the (uniform or most conservative) query probability,
    so that every W_i lies in [0, loss_bound / query_prob].
    """

    weighted_losses: np.ndarray
    alpha: float
    loss_bound: float
    query_prob: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weighted_losses, dtype=np.float64)
        object.__setattr__(self, "weighted_losses", w)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weighted_losses must be a non-empty 1-d vector")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.loss_bound <= 0.0:
            raise ValueError(f"loss_bound must be positive, got {self.loss_bound}")
        if not 0.0 < self.query_prob <= 1.0:
            raise ValueError(
                f"query_prob must be in (0, 1], got {self.query_prob}"
            )
        upper = self.loss_bound / self.query_prob
        if w.min() < 0.0 or w.max() > upper:
            raise ValueError(
                f"weighted losses must lie in [0, {upper}] "
                f"(loss_bound/query_prob)"
            )

    @property
    def m(self) -> int:
        return int(self.weighted_losses.size)


def normal_quantile(q: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {q}")
    return float(ndtri(q))


def ucb_clt(inp: UcbInput) -> float:
    """Normal-approximation bound; degenerates to the bare mean at zero spread."""
    if inp.m < 2:
        raise ValueError("clt bound needs at least 2 observations")
    w = inp.weighted_losses
    mean = float(np.mean(w))
    std = float(np.std(w, ddof=1))
    if std == 0.0:
        return mean
    return mean + normal_quantile(1.0 - inp.alpha) * std / math.sqrt(inp.m)


def ucb_hoeffding(inp: UcbInput) -> float:
    """Range-based finite-sample bound; width is data-independent."""
    w = inp.weighted_losses
    margin = (
        inp.loss_bound
        / (inp.query_prob * math.sqrt(2.0 * inp.m))
        * math.sqrt(math.log(1.0 / inp.alpha))
    )
    return float(np.mean(w)) + margin


def ucb_bernstein(inp: UcbInput) -> float:
    """Variance-adaptive finite-sample bound."""
    if inp.m < 2:
        raise ValueError("bernstein bound needs at least 2 observations")
    w = inp.weighted_losses
    m = inp.m
    log_term = math.log(2.0 / inp.alpha)
    variance = float(np.var(w, ddof=1))
    return (
        float(np.mean(w))
        + math.sqrt(2.0 * variance * log_term / m)
        + 7.0 * inp.loss_bound * log_term / (3.0 * (m - 1) * inp.query_prob)
    )


# --- betting bound ----------------------------------------------------------


def betting_candidates(grid_size: int) -> np.ndarray:
    """Uniform candidate-mean grid over [0, 1], endpoint pinned to 1."""
    if grid_size < 2:
        raise ValueError("candidate grid needs at least 2 points")
    step = 1.0 / (grid_size - 1)
    cand = np.arange(grid_size, dtype=np.float64) * step
    cand[-1] = 1.0
    return cand


def betting_lambdas(
    x: np.ndarray, alpha: float, use_running_t: bool = False
) -> np.ndarray:
    """Bet-size schedule from running prior-regularized mean and variance.

    At step t the schedule uses the variance estimate from step t-1 (0.25
    before any data).  The denominator uses the total sample size m as the
    construction is printed; ``use_running_t`` switches to the running index,
    a plausible but unconfirmed alternative reading.
    """
    m = x.shape[0]
    log_term = 2.0 * math.log(2.0 / alpha)
    lambdas = np.empty(m)
    s1 = 0.0
    s2 = 0.0
    sigma2 = 0.25
    for t in range(1, m + 1):
        denom = (t if use_running_t else m) * sigma2
        lambdas[t - 1] = math.sqrt(log_term / denom)
        xj = float(x[t - 1])
        s1 = s1 + xj
        s2 = s2 + xj * xj
        mu = (0.5 + s1) / (t + 1.0)
        sigma2 = (0.25 + s2 - 2.0 * mu * s1 + t * mu * mu) / (t + 1.0)
    return lambdas


def betting_survival(
    x: np.ndarray,
    alpha: float,
    grid_size: int = DEFAULT_BETTING_GRID_SIZE,
    use_running_t: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Survival mask of candidate means against the capped betting wealth.

    A candidate c is refuted once either directional wealth process reaches
    2/alpha (equivalently, once the averaged supermartingale reaches
    1/alpha).  The bet against c is capped at 0.5/c (resp. 0.5/(1-c)) so
    wealth stays positive.  Returns (candidates, surviving_mask).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("need a non-empty 1-d vector of normalized losses")
    cand = betting_candidates(grid_size)
    lambdas = betting_lambdas(x, alpha, use_running_t)
    with np.errstate(divide="ignore"):
        inv_plus = np.where(cand > 0.0, 0.5 / cand, np.inf)
        inv_minus = np.where(cand < 1.0, 0.5 / (1.0 - cand), np.inf)
    diff = x[:, None] - cand[None, :]
    factors_plus = 1.0 + np.minimum(lambdas[:, None], inv_plus[None, :]) * diff
    factors_minus = 1.0 - np.minimum(lambdas[:, None], inv_minus[None, :]) * diff
    wealth = np.maximum(
        np.cumprod(factors_plus, axis=0), np.cumprod(factors_minus, axis=0)
    )
    surviving = wealth.max(axis=0) < 2.0 / alpha
    return cand, surviving


def normalize_weighted(
    w: np.ndarray, loss_bound: float, query_prob: float
) -> np.ndarray:
    """Map weighted losses from [0, B/p] onto [0, 1] for the betting bound."""
    x = np.asarray(w, dtype=np.float64) * (query_prob / loss_bound)
    return np.minimum(x, 1.0)


def ucb_betting(
    inp: UcbInput,
    grid_size: int = DEFAULT_BETTING_GRID_SIZE,
    use_running_t: bool = False,
) -> float:
    """Betting-style bound: rescaled supremum of the surviving candidates.

    The supremum is rounded up by one grid step to cover means between grid
    points; an empty surviving set falls back to the trivial bound B.  The
    result is never below mean(W).
    """
    w = inp.weighted_losses
    x = normalize_weighted(w, inp.loss_bound, inp.query_prob)
    cand, surviving = betting_survival(x, inp.alpha, grid_size, use_running_t)
    w_mean = float(np.mean(w))
    if not surviving.any():
        return max(inp.loss_bound, w_mean)
    step = 1.0 / (grid_size - 1)
    sup = float(cand[np.flatnonzero(surviving)[-1]])
    bumped = min(sup + step, 1.0)
    return max(bumped * (inp.loss_bound / inp.query_prob), w_mean)


_DISPATCH = {
    "clt": ucb_clt,
    "hoeffding": ucb_hoeffding,
    "bernstein": ucb_bernstein,
    "betting": ucb_betting,
}


def compute_ucb(
    kind: str,
    inp: UcbInput,
    betting_grid_size: int = DEFAULT_BETTING_GRID_SIZE,
    betting_use_running_t: bool = False,
) -> float:
    if kind not in _DISPATCH:
        raise ValueError(f"unknown ucb kind {kind!r}")
    if kind == "betting":
        return ucb_betting(inp, betting_grid_size, betting_use_running_t)
    return _DISPATCH[kind](inp)
