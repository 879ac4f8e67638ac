"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one [PASS]/[FAIL] line (run with ``pytest -s`` to see them
live).  Monte Carlo criteria use fixed master seeds, so reruns are exact.
"""

import math
from dataclasses import replace
from itertools import combinations_with_replacement, product

import numpy as np
import pytest

from pacroute import (
    CalibrationConfig,
    GridSpec,
    MaskedCalibrationSet,
    Surface,
    SyntheticScenario,
    ThresholdVector,
    UcbInput,
    adversarial_scenario,
    brute_force_optimal,
    default_scenario,
    empirical_bound_check,
    empirical_risk,
    importance_weighted_risk,
    method_comparison,
    monotonicity_check,
    pac_coverage_experiment,
    select_thresholds,
    ucb_bernstein,
    ucb_betting,
    ucb_clt,
    ucb_hoeffding,
)
from pacroute.cli import run_cli

from conftest import make_record, random_records

EPSILON = 0.05
ALPHA = 0.05
P_SAMPLE = 0.9
M_CAL = 300
SLACK_1000 = 3 * math.sqrt(ALPHA * (1 - ALPHA) / 1000)  # 0.02067...
SLACK_2000 = 3 * math.sqrt(ALPHA * (1 - ALPHA) / 2000)  # 0.01462...
CLT_VIOLATION_CAP = 0.07

COVERAGE_GRID = GridSpec("uniform", step=0.1)


def _report(label: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, f"{label}: {detail}"


def _config(kind: str) -> CalibrationConfig:
    return CalibrationConfig(
        epsilon=EPSILON,
        alpha=ALPHA,
        query_prob=P_SAMPLE,
        grid=COVERAGE_GRID,
        ucb_kind=kind,
    )


def _coverage_criterion(scenario, label):
    for kind in ("hoeffding", "bernstein", "betting", "clt"):
        rep = pac_coverage_experiment(
            scenario, _config(kind), 1000, keep_per_trial=False
        )
        cap = CLT_VIOLATION_CAP if kind == "clt" else ALPHA + SLACK_1000
        _report(
            f"{label} ({kind})",
            rep.violation_rate <= cap,
            f"violation_rate={rep.violation_rate:.4f} <= {cap:.4f} "
            f"(savings={rep.mean_cost_savings:.1f}%, fallbacks={rep.fallback_count})",
        )


def test_criterion_1_pac_coverage():
    # Monte Carlo certificate of the calibration-draw guarantee: 1000 fresh
    # draws at K=3, m=300, true-risk violations counted per UCB kind
    scenario = default_scenario(n_test=200, n_cal=M_CAL)
    _coverage_criterion(scenario, "criterion 1 pac coverage K=3")


def _random_surface(rng, num_sources, max_grid):
    n_grid = int(rng.integers(2, max_grid + 1))
    grid = np.linspace(0.0, 1.0, n_grid)
    cells = tuple(combinations_with_replacement(grid.tolist(), num_sources - 1))
    n = len(cells)
    ucb = rng.random(n) * 2 * EPSILON
    cost = rng.random(n) * 5
    if rng.random() < 0.5:
        cost = np.round(cost, 1)  # force cost ties to exercise tie-breaking
    return Surface(
        num_sources=num_sources,
        grid=tuple(grid.tolist()),
        cells=cells,
        r_is=np.zeros(n),
        sigma_w=np.zeros(n),
        ucb=ucb,
        cost=cost,
    )


def _optimality_criterion(num_sources, max_grid, label):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(200):
        surface = _random_surface(rng, num_sources, max_grid)
        out = select_thresholds(surface, EPSILON)
        oracle = brute_force_optimal(surface, EPSILON)
        if oracle is None:
            mismatches += int(not out.fallback_used)
        else:
            mismatches += int(out.thresholds.u != oracle)
    _report(label, mismatches == 0, f"mismatches={mismatches}/200 surfaces")


def test_criterion_2_cost_optimality():
    _optimality_criterion(3, 30, "criterion 2 cost optimality (grids to 30x30)")


def _masked(records, mask, p):
    return MaskedCalibrationSet(
        tuple(
            make_record(r.id, r.score, r.losses, r.costs, z=z, p=p)
            for r, z in zip(records, mask)
        )
    )


def _unbiasedness_criterion(num_sources, label):
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(100):
        m = 2 + i % 11  # m in 2..12
        records = random_records(rng, m, k=num_sources)
        u = np.sort(rng.random(num_sources - 1))
        tv = ThresholdVector(tuple(u))
        p = float(rng.uniform(0.3, 1.0))
        terms = []
        for mask in product((0, 1), repeat=m):
            prob = math.prod(p if z else (1 - p) for z in mask)
            terms.append(prob * importance_weighted_risk(_masked(records, mask, p), tv))
        expectation = math.fsum(terms)
        worst = max(worst, abs(expectation - empirical_risk(tv, records)))
    _report(label, worst <= 1e-12, f"max |E[R_IS] - R_plain| = {worst:.2e} <= 1e-12")


def test_criterion_3_unbiasedness():
    _unbiasedness_criterion(3, "criterion 3 unbiasedness (2^m enumeration)")


def _monotonicity_criterion(num_sources, label):
    rng = np.random.default_rng(11)
    grid = (0.0, 0.25, 0.5, 0.75, 1.0)
    failures = 0
    for _ in range(500):
        records = random_records(rng, 30, k=num_sources)
        failures += int(not monotonicity_check(records, grid, "cost").passed)
        failures += int(not monotonicity_check(records, grid, "risk_top").passed)
    for _ in range(500):
        records = random_records(rng, 30, k=num_sources, dominance=True)
        failures += int(
            not monotonicity_check(records, grid, "risk_dominance").passed
        )
    _report(label, failures == 0, f"counterexamples={failures} over 1500 checks")


def test_criterion_4_monotonicity():
    _monotonicity_criterion(3, "criterion 4 monotonicity (500+500 fixtures)")


def _weighted_draw(rng, m, p, top):
    # linear error curves routed at fixed thresholds (0.5, 0.8) or (0.9, 1.0)
    s = rng.random(m)
    if top:
        q = np.where(s <= 0.9, s, 0.5 * s)
    else:
        q = np.where(s <= 0.5, s, np.where(s <= 0.8, 0.5 * s, 0.0))
    losses = (rng.random(m) < q).astype(float)
    z = (rng.random(m) < p).astype(float)
    return z * losses / p


def test_criterion_5_ucb_validity():
    # fixed-threshold coverage; true risks are exact integrals of the curves
    r_low = 0.2225  # thresholds (0.5, 0.8): 0.5^2/2 + (0.8^2 - 0.5^2)/4
    r_high = 0.4525  # thresholds (0.9, 1.0): 0.9^2/2 + (1 - 0.9^2)/4
    trials = 2000
    bar = 1 - ALPHA - SLACK_2000
    cases = [
        ("hoeffding", ucb_hoeffding, 300, r_low, bar),
        ("bernstein", ucb_bernstein, 300, r_low, bar),
        ("betting", ucb_betting, 300, r_low, bar),
        ("betting m=50", ucb_betting, 50, r_low, bar),
        ("clt m=200", ucb_clt, 200, r_high, 1 - ALPHA - 0.02),
    ]
    rng = np.random.default_rng(13)
    for name, fn, m, true_risk, threshold in cases:
        covered = 0
        for _ in range(trials):
            w = _weighted_draw(rng, m, P_SAMPLE, top=true_risk == r_high)
            covered += int(true_risk <= fn(UcbInput(w, ALPHA, 1.0, P_SAMPLE)))
        rate = covered / trials
        _report(
            f"criterion 5 ucb validity ({name})",
            rate >= threshold,
            f"coverage={rate:.4f} >= {threshold:.4f}",
        )


def test_criterion_6_empirical_risk_bound():
    scenario = default_scenario(n_test=2000)
    cfg = _config("bernstein")
    rep = empirical_bound_check(scenario, cfg, trials=500, t=0.05)
    floor = rep.theoretical_bound - 0.02
    _report(
        "criterion 6 empirical-risk bound",
        rep.fraction_within >= floor,
        f"fraction={rep.fraction_within:.4f} >= {floor:.5f} "
        f"(theoretical={rep.theoretical_bound:.5f})",
    )


def test_criterion_7_baseline_separation():
    scenario = adversarial_scenario(n_cal=300, n_test=200)
    cfg = CalibrationConfig(
        epsilon=EPSILON,
        alpha=ALPHA,
        query_prob=P_SAMPLE,
        grid=GridSpec("uniform", step=0.05),
        ucb_kind="bernstein",
    )
    rep = method_comparison(scenario, cfg, 1000, methods=("hypac", "coannotating"))
    rows = {r["method"]: r for r in rep.rows}
    heuristic = rows["coannotating"]["violation_rate"]
    engine = rows["hypac"]["violation_rate"]
    _report(
        "criterion 7 baseline separation",
        heuristic > 2 * ALPHA and engine <= ALPHA + SLACK_1000,
        f"coannotating={heuristic:.3f} > {2 * ALPHA}, "
        f"hypac={engine:.4f} <= {ALPHA + SLACK_1000:.4f}",
    )


def test_criterion_8_four_source_generalization():
    scenario = default_scenario(num_sources=4, n_test=200, n_cal=M_CAL)
    _coverage_criterion(scenario, "criterion 8 pac coverage K=4")
    _optimality_criterion(4, 12, "criterion 8 cost optimality K=4")
    _unbiasedness_criterion(4, "criterion 8 unbiasedness K=4")
    _monotonicity_criterion(4, "criterion 8 monotonicity K=4")


def test_criterion_9_determinism(tmp_path, capsys):
    args = [
        "validate",
        "--trials",
        "100",
        "--grid",
        "uniform:0.1",
        "--ucb",
        "bernstein",
        "--master-seed",
        "12345",
    ]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run_cli(args + ["--out", str(a)]) == 0
    assert run_cli(args + ["--out", str(b)]) == 0
    capsys.readouterr()
    identical = a.read_bytes() == b.read_bytes()
    _report(
        "criterion 9 determinism",
        identical,
        f"repeated validate runs byte-identical={identical}",
    )
