"""Command-line interface.

Subcommands map onto the two phases of the method plus the harness:
``calibrate`` fits thresholds from a record file, ``route`` applies a saved
outcome to records, ``simulate`` writes synthetic record files, ``validate``
runs Monte Carlo certification, and ``report`` renders saved reports.

Exit codes: 0 on success, 2 on usage or validation errors, 1 on anything
unexpected; errors are a single machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .baselines import METHODS, coannotating_select, pac_labeling_calibrate
from .calibration import CellBudgetError, build_grid, calibrate, deploy
from .harness import (
    SyntheticScenario,
    api_costs,
    generate,
    method_comparison,
    pac_coverage_experiment,
    token_costs,
)
from .model import (
    CalibrationConfig,
    CalibrationOutcome,
    GridSpec,
    SourceLadder,
    ThresholdVector,
    ValidationError,
)
from .routing import cost_savings, empirical_cost, empirical_risk

import numpy as np


class CliError(Exception):
    """User-facing CLI failure with a single-line message."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D102 - argparse hook
        raise CliError(f"usage: {message}")


def _parse_grid(text: str) -> GridSpec:
    if text == "from-scores":
        return GridSpec("from_scores")
    if text.startswith("uniform:"):
        return GridSpec("uniform", step=float(text.split(":", 1)[1]))
    if text.startswith("file:"):
        path = Path(text.split(":", 1)[1])
        raw = path.read_text(encoding="utf-8").strip()
        if raw.startswith("["):
            values = json.loads(raw)
        else:
            values = [float(line) for line in raw.splitlines() if line.strip()]
        return GridSpec("explicit", values=tuple(values))
    raise CliError(
        f"unknown grid {text!r}; expected uniform:STEP, from-scores, or file:PATH"
    )


def _add_config_flags(
    p: argparse.ArgumentParser, grid_default: str = "from-scores"
) -> None:
    p.add_argument("--epsilon", type=float, default=0.05, help="target risk level")
    p.add_argument("--alpha", type=float, default=0.05, help="failure probability")
    p.add_argument(
        "--p-sample", type=float, default=0.9, help="ground-truth query probability"
    )
    p.add_argument(
        "--ucb",
        choices=["clt", "hoeffding", "bernstein", "betting"],
        default="clt",
        help="upper confidence bound construction",
    )
    p.add_argument(
        "--grid",
        default=grid_default,
        help="uniform:STEP | from-scores | file:PATH",
    )
    p.add_argument("--seed", type=int, default=42, help="mask/query seed")
    p.add_argument("--loss-bound", type=float, default=1.0, help="loss upper bound B")
    p.add_argument("--cell-budget", type=int, default=10**6)


def _config_from_args(args: argparse.Namespace) -> CalibrationConfig:
    return CalibrationConfig(
        epsilon=args.epsilon,
        alpha=args.alpha,
        query_prob=args.p_sample,
        loss_bound=args.loss_bound,
        grid=_parse_grid(args.grid),
        ucb_kind=args.ucb,
        seed=args.seed,
        cell_budget=args.cell_budget,
    )


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def build_parser() -> _Parser:
    parser = _Parser(prog="pacroute", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_cal = sub.add_parser("calibrate", help="fit routing thresholds from records")
    p_cal.add_argument("--records", default=None)
    p_cal.add_argument("--out", default=None, help="outcome JSON path")
    p_cal.add_argument(
        "--config",
        default=None,
        help="run-config JSON (records/out/method/engine settings); "
        "explicit flags override it",
    )
    p_cal.add_argument("--method", choices=list(METHODS), default=None)
    p_cal.add_argument(
        "--sources", type=int, default=None, help="expected number of sources"
    )
    p_cal.add_argument(
        "--diagnostics", action="store_true", help="embed the full UCB surface"
    )
    _add_config_flags(p_cal)

    p_route = sub.add_parser("route", help="apply a saved outcome to records")
    p_route.add_argument("--outcome", required=True)
    p_route.add_argument("--records", required=True)
    p_route.add_argument("--out", required=True, help="decisions CSV path")
    p_route.add_argument("--summary", default=None, help="summary JSON path")

    p_sim = sub.add_parser("simulate", help="write synthetic record files")
    p_sim.add_argument("--scenario", default=None, help="scenario JSON path")
    p_sim.add_argument("--out-dir", required=True)
    p_sim.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p_sim.add_argument("--sources", type=int, default=None)
    p_sim.add_argument("--n-cal", type=int, default=None)
    p_sim.add_argument("--n-test", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--costs", type=str, default=None, help="e.g. 1,2,8")
    p_sim.add_argument(
        "--cost-model", choices=["constant", "token", "api"], default="constant"
    )
    p_sim.add_argument(
        "--tokens", type=str, default=None, help="per-source generated token counts"
    )
    p_sim.add_argument("--price-in", type=str, default=None)
    p_sim.add_argument("--price-out", type=str, default=None)
    p_sim.add_argument("--n-in", type=float, default=None)
    p_sim.add_argument("--n-out", type=str, default=None)

    p_val = sub.add_parser("validate", help="Monte Carlo coverage certification")
    p_val.add_argument("--scenario", default=None, help="scenario JSON path")
    p_val.add_argument("--trials", type=int, default=1000)
    p_val.add_argument("--out", required=True, help="report JSON path")
    p_val.add_argument(
        "--master-seed", type=int, default=None, help="defaults to the scenario seed"
    )
    p_val.add_argument(
        "--compare",
        default=None,
        help="comma-separated methods for a comparison report instead",
    )
    # per-draw score grids explode the per-trial cell count; certification
    # runs default to a fixed coarse grid
    _add_config_flags(p_val, grid_default="uniform:0.1")

    p_rep = sub.add_parser("report", help="render a saved report")
    p_rep.add_argument("--in", dest="infile", required=True)
    p_rep.add_argument("--csv", default=None, help="also write a flat CSV table")

    return parser


def _cmd_calibrate(args: argparse.Namespace) -> int:
    ladder = None
    method = args.method
    records_path, out_path = args.records, args.out
    config = None
    if args.config:
        run_cfg = io.run_config_from_dict(io.read_json(args.config))
        config = run_cfg["config"]
        ladder = run_cfg["ladder"]
        method = method or run_cfg["method"]
        records_path = records_path or run_cfg["records"]
        out_path = out_path or run_cfg["out"]
    method = method or "hypac"
    if not records_path or not out_path:
        raise CliError("usage: --records and --out are required (flags or --config)")
    if not Path(records_path).exists():
        raise CliError(f"records file not found: {records_path}")
    records = io.parse_records(records_path)
    k = records[0].num_sources
    if args.sources is not None and args.sources != k:
        raise CliError(
            f"invalid combination: --sources {args.sources} but file has {k}"
        )
    if config is None:
        config = _config_from_args(args)
    if ladder is None:
        ladder = SourceLadder.default(k)
    if ladder.num_sources != k:
        raise CliError(
            f"invalid combination: config ladder has {ladder.num_sources} "
            f"sources but records have {k}"
        )
    if method == "hypac":
        outcome = calibrate(
            records, ladder, config, keep_diagnostics=args.diagnostics
        )
    elif method == "pac-labeling":
        if k != 2:
            raise CliError(
                f"invalid combination: --method pac-labeling needs 2 sources, got {k}"
            )
        outcome = pac_labeling_calibrate(records, ladder, config)
    else:
        if k != 3:
            raise CliError(
                f"invalid combination: --method coannotating needs 3 sources, got {k}"
            )
        grid = build_grid(config.grid, scores=[r.score for r in records])
        tv = coannotating_select(records, ladder, config.epsilon, grid)
        outcome = _coannotating_outcome(tv, records, grid, config)
    io.write_report(outcome, out_path, config=config, ladder=ladder)
    print(
        f"thresholds={list(outcome.thresholds.u)} fallback={outcome.fallback_used} "
        f"feasible_cells={outcome.feasible_count} -> {out_path}"
    )
    return 0


def _coannotating_outcome(
    tv: ThresholdVector,
    records: list,
    grid: np.ndarray,
    config: CalibrationConfig,
) -> CalibrationOutcome:
    """Wrap the heuristic's thresholds in outcome form for uniform reporting.

    The heuristic has no confidence bound, so the selection statistic stored
    in the ucb slot is the plain calibration risk.
    """
    from itertools import combinations_with_replacement

    feasible = 0
    for cell in combinations_with_replacement(grid.tolist(), tv.num_sources - 1):
        if empirical_risk(ThresholdVector(cell), records) <= config.epsilon:
            feasible += 1
    risk = empirical_risk(tv, records)
    return CalibrationOutcome(
        thresholds=tv,
        feasible_count=feasible,
        ucb_at_selection=risk,
        empirical_cost=empirical_cost(tv, records),
        fallback_used=feasible == 0,
        n_queried=0,
    )


def _cmd_route(args: argparse.Namespace) -> int:
    outcome, config, ladder = io.outcome_from_dict(io.read_json(args.outcome))
    records = io.parse_records(args.records)
    if records[0].num_sources != ladder.num_sources:
        raise CliError(
            f"invalid combination: outcome has {ladder.num_sources} sources, "
            f"records have {records[0].num_sources}"
        )
    decisions = deploy(outcome, records)
    import csv as _csv

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["id", "score", "source_index", "source_name", "cost", "loss"])
        for r, d in zip(records, decisions):
            writer.writerow(
                [
                    r.id,
                    repr(r.score),
                    d.source_index,
                    ladder.sources[d.source_index].name,
                    repr(d.cost),
                    repr(d.loss),
                ]
            )
    tv = outcome.thresholds
    summary = {
        "n_records": len(records),
        "mean_error": empirical_risk(tv, records),
        "mean_cost": empirical_cost(tv, records),
        "cost_savings_pct": cost_savings(tv, records),
        "fallback_used": outcome.fallback_used,
        "thresholds": list(tv.u),
        "config_hash": io.config_hash(
            {"config": io.config_to_dict(config), "ladder": io.ladder_to_dict(ladder)}
        ),
        "seed": config.seed,
    }
    if args.summary:
        io.write_json(summary, args.summary)
    print(
        f"routed {summary['n_records']} records: mean_error={summary['mean_error']:.6f} "
        f"savings={summary['cost_savings_pct']:.2f}% -> {args.out}"
    )
    return 0


def _scenario_from_args(
    args: argparse.Namespace, scenario_seed_flag: bool = True
) -> SyntheticScenario:
    if args.scenario:
        scenario = io.scenario_from_dict(io.read_json(args.scenario))
    elif getattr(args, "sources", None) is not None:
        from .harness import default_scenario

        if args.sources not in (3, 4):
            raise CliError(
                "built-in scenarios cover 3 or 4 sources; pass --scenario for others"
            )
        scenario = default_scenario(args.sources)
    else:
        scenario = SyntheticScenario()
    overrides = {}
    if getattr(args, "n_cal", None) is not None:
        overrides["n_cal"] = args.n_cal
    if getattr(args, "n_test", None) is not None:
        overrides["n_test"] = args.n_test
    if scenario_seed_flag and getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "costs", None):
        overrides["costs"] = _floats(args.costs)
    return replace(scenario, **overrides) if overrides else scenario


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _scenario_from_args(args)
    if args.cost_model == "token":
        if not args.tokens:
            raise CliError("--cost-model token needs --tokens")
        scenario = replace(scenario, costs=token_costs(_floats(args.tokens)))
    elif args.cost_model == "api":
        if not (args.price_in and args.price_out and args.n_in and args.n_out):
            raise CliError(
                "--cost-model api needs --price-in, --price-out, --n-in, --n-out"
            )
        scenario = replace(
            scenario,
            costs=api_costs(
                _floats(args.price_in),
                _floats(args.price_out),
                args.n_in,
                _floats(args.n_out),
            ),
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cal, test, _ = generate(scenario)
    ext = args.format
    io.write_records(cal, out_dir / f"cal.{ext}", ext)
    io.write_records(test, out_dir / f"test.{ext}", ext)
    scen = io.scenario_to_dict(scenario)
    io.write_json(
        {
            "format": "scenario",
            "scenario": scen,
            "config_hash": io.config_hash({"scenario": scen}),
            "seed": scenario.seed,
        },
        out_dir / "scenario.json",
    )
    print(
        f"wrote {len(cal)} calibration and {len(test)} test records to {out_dir}"
    )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    # --seed drives the mask stream here, not the scenario
    scenario = _scenario_from_args(args, scenario_seed_flag=False)
    config = _config_from_args(args)
    master = args.master_seed if args.master_seed is not None else scenario.seed
    if args.compare:
        methods = tuple(m.strip() for m in args.compare.split(","))
        report = method_comparison(scenario, config, args.trials, methods)
    else:
        report = pac_coverage_experiment(
            scenario, config, args.trials, master_seed=master
        )
    io.write_report(report, args.out)
    if hasattr(report, "violation_rate"):
        print(
            f"trials={report.trials} violation_rate={report.violation_rate:.4f} "
            f"mean_savings={report.mean_cost_savings:.2f}% -> {args.out}"
        )
    else:
        print(f"trials={report.trials} methods={len(report.rows)} -> {args.out}")
    return 0


def _render_report(payload: dict) -> str:
    kind = payload.get("format", "unknown")
    lines = [f"[{kind}]"]
    if kind == "coverage_report":
        lines.append(
            f"trials={payload['trials']} violations={payload['violations']} "
            f"violation_rate={payload['violation_rate']:.4f}"
        )
        lines.append(
            f"mean_error={payload['mean_error']:.6f} "
            f"mean_true_risk={payload['mean_true_risk']:.6f} "
            f"mean_cost_savings={payload['mean_cost_savings']:.2f}% "
            f"fallbacks={payload['fallback_count']}"
        )
        lines.append(f"master_seed={payload['master_seed']}")
    elif kind == "comparison_report":
        header = f"{'method':<14} {'violation':>10} {'mean_err':>10} {'savings%':>10} {'fallback':>10}"
        lines.append(header)
        lines.append("-" * len(header))
        for row in payload["rows"]:
            lines.append(
                f"{row['method']:<14} {row['violation_rate']:>10.4f} "
                f"{row['mean_error']:>10.5f} {row['mean_cost_savings']:>10.2f} "
                f"{row['fallback_rate']:>10.4f}"
            )
    elif kind == "calibration_outcome":
        lines.append(f"thresholds={payload['thresholds']}")
        lines.append(
            f"fallback={payload['fallback_used']} feasible={payload['feasible_count']} "
            f"ucb_at_selection={payload['ucb_at_selection']:.6f} "
            f"empirical_cost={payload['empirical_cost']:.6f}"
        )
    elif kind == "bound_check_report":
        lines.append(
            f"trials={payload['trials']} n_test={payload['n_test']} t={payload['t']}"
        )
        lines.append(
            f"fraction_within={payload['fraction_within']:.4f} "
            f"theoretical_bound={payload['theoretical_bound']:.4f}"
        )
    else:
        lines.append(json.dumps(payload, indent=2))
    return "\n".join(lines)


def _cmd_report(args: argparse.Namespace) -> int:
    payload = io.read_json(args.infile)
    print(_render_report(payload))
    if args.csv:
        io.write_payload(payload, args.csv, "csv")
        print(f"csv -> {args.csv}")
    return 0


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "route": _cmd_route,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
    "report": _cmd_report,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, io.RecordFileError, CellBudgetError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
