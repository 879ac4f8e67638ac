"""Record-file formats, report serialization, and config hashing.

Two record formats: newline-delimited JSON objects (keys id, score, losses,
costs, optional z/p) and header-bearing CSV (columns id, score,
loss_0..loss_{K-1}, cost_0..cost_{K-1}, optional z, p).  Floats are written
in shortest round-trip decimal form, so parse(write(x)) reproduces every
numeric field bit-identically.  Every artifact embeds the config (or
scenario), its hash, and the seed that produced it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from pathlib import Path
from typing import Any

import numpy as np

from .calibration import Surface
from .harness import (
    BoundCheckReport,
    ComparisonReport,
    CoverageReport,
    SyntheticScenario,
)
from .model import (
    AnnotationRecord,
    CalibrationConfig,
    CalibrationOutcome,
    GridSpec,
    SourceLadder,
    SourceSpec,
    ThresholdVector,
    ValidationError,
)

RECORD_FORMATS = ("jsonl", "csv")


class RecordFileError(ValueError):
    """A record file is malformed; the message names the offending line."""


def detect_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    raise RecordFileError(
        f"cannot infer record format from suffix {suffix!r}; pass one of "
        f"{RECORD_FORMATS}"
    )


def _record_from_mapping(obj: dict, line: int) -> AnnotationRecord:
    try:
        return AnnotationRecord(
            id=str(obj["id"]),
            score=float(obj["score"]),
            losses=tuple(float(x) for x in obj["losses"]),
            costs=tuple(float(x) for x in obj["costs"]),
            query_mask=None if obj.get("z") is None else int(obj["z"]),
            query_prob=None if obj.get("p") is None else float(obj["p"]),
        )
    except KeyError as exc:
        raise RecordFileError(f"line {line}: missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise RecordFileError(f"line {line}: {exc}") from exc


def _parse_jsonl(path: Path) -> list[AnnotationRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordFileError(f"line {line_no}: invalid JSON: {exc}") from exc
            records.append(_record_from_mapping(obj, line_no))
    return records


def _parse_csv(path: Path) -> list[AnnotationRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        loss_cols = sorted(
            (c for c in reader.fieldnames if re.fullmatch(r"loss_\d+", c)),
            key=lambda c: int(c.split("_")[1]),
        )
        cost_cols = sorted(
            (c for c in reader.fieldnames if re.fullmatch(r"cost_\d+", c)),
            key=lambda c: int(c.split("_")[1]),
        )
        for line_no, row in enumerate(reader, start=2):
            obj: dict[str, Any] = {
                "id": row.get("id"),
                "score": row.get("score"),
                "losses": [row[c] for c in loss_cols],
                "costs": [row[c] for c in cost_cols],
            }
            if row.get("z"):
                obj["z"] = row["z"]
            if row.get("p"):
                obj["p"] = row["p"]
            records.append(_record_from_mapping(obj, line_no))
    return records


def parse_records(path: str | Path, fmt: str | None = None) -> list[AnnotationRecord]:
    """Load and structurally validate records, preserving file order."""
    path = Path(path)
    fmt = fmt or detect_format(path)
    if fmt not in RECORD_FORMATS:
        raise RecordFileError(f"unknown record format {fmt!r}")
    records = _parse_jsonl(path) if fmt == "jsonl" else _parse_csv(path)
    if not records:
        raise RecordFileError(f"{path}: no records")
    k = records[0].num_sources
    for i, r in enumerate(records):
        if r.num_sources != k:
            raise RecordFileError(
                f"record {i + 1} ({r.id!r}): inconsistent source count "
                f"{r.num_sources} != {k}"
            )
    return records


def write_records(
    records: list[AnnotationRecord], path: str | Path, fmt: str | None = None
) -> None:
    path = Path(path)
    fmt = fmt or detect_format(path)
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for r in records:
                obj: dict[str, Any] = {
                    "id": r.id,
                    "score": r.score,
                    "losses": list(r.losses),
                    "costs": list(r.costs),
                }
                if r.query_mask is not None:
                    obj["z"] = r.query_mask
                    obj["p"] = r.query_prob
                fh.write(json.dumps(obj) + "\n")
        return
    k = records[0].num_sources
    header = (
        ["id", "score"]
        + [f"loss_{i}" for i in range(k)]
        + [f"cost_{i}" for i in range(k)]
        + ["z", "p"]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in records:
            writer.writerow(
                [r.id, repr(r.score)]
                + [repr(x) for x in r.losses]
                + [repr(x) for x in r.costs]
                + [
                    "" if r.query_mask is None else r.query_mask,
                    "" if r.query_prob is None else repr(r.query_prob),
                ]
            )


# --- dataclass <-> dict -----------------------------------------------------


def grid_spec_to_dict(g: GridSpec) -> dict:
    out: dict[str, Any] = {"mode": g.mode}
    if g.step is not None:
        out["step"] = g.step
    if g.values is not None:
        out["values"] = list(g.values)
    return out


def grid_spec_from_dict(d: dict) -> GridSpec:
    return GridSpec(
        mode=d["mode"],
        step=d.get("step"),
        values=None if d.get("values") is None else tuple(d["values"]),
    )


def config_to_dict(c: CalibrationConfig) -> dict:
    return {
        "epsilon": c.epsilon,
        "alpha": c.alpha,
        "query_prob": c.query_prob,
        "loss_bound": c.loss_bound,
        "grid": grid_spec_to_dict(c.grid),
        "ucb_kind": c.ucb_kind,
        "seed": c.seed,
        "cell_budget": c.cell_budget,
        "betting_grid_size": c.betting_grid_size,
        "betting_lambda_running_t": c.betting_lambda_running_t,
    }


def config_from_dict(d: dict) -> CalibrationConfig:
    return CalibrationConfig(
        epsilon=d["epsilon"],
        alpha=d["alpha"],
        query_prob=d["query_prob"],
        loss_bound=d["loss_bound"],
        grid=grid_spec_from_dict(d["grid"]),
        ucb_kind=d["ucb_kind"],
        seed=d["seed"],
        cell_budget=d.get("cell_budget", CalibrationConfig().cell_budget),
        betting_grid_size=d.get(
            "betting_grid_size", CalibrationConfig().betting_grid_size
        ),
        betting_lambda_running_t=d.get("betting_lambda_running_t", False),
    )


def ladder_to_dict(ladder: SourceLadder) -> dict:
    return {
        "sources": [
            {"name": s.name, "is_ground_truth": s.is_ground_truth}
            for s in ladder.sources
        ]
    }


def ladder_from_dict(d: dict) -> SourceLadder:
    return SourceLadder(
        tuple(
            SourceSpec(s["name"], bool(s["is_ground_truth"])) for s in d["sources"]
        )
    )


def scenario_to_dict(s: SyntheticScenario) -> dict:
    return {
        "num_sources": s.num_sources,
        "n_cal": s.n_cal,
        "n_test": s.n_test,
        "seed": s.seed,
        "score_dist": list(s.score_dist),
        "loss_coef": list(s.loss_coef),
        "loss_power": list(s.loss_power),
        "costs": list(s.costs),
        "cost_score_slope": s.cost_score_slope,
        "loss_bound": s.loss_bound,
    }


def scenario_from_dict(d: dict) -> SyntheticScenario:
    base = SyntheticScenario()
    return SyntheticScenario(
        num_sources=d.get("num_sources", base.num_sources),
        n_cal=d.get("n_cal", base.n_cal),
        n_test=d.get("n_test", base.n_test),
        seed=d.get("seed", base.seed),
        score_dist=tuple(d.get("score_dist", base.score_dist)),
        loss_coef=tuple(d.get("loss_coef", base.loss_coef)),
        loss_power=tuple(d.get("loss_power", base.loss_power)),
        costs=tuple(d.get("costs", base.costs)),
        cost_score_slope=d.get("cost_score_slope", base.cost_score_slope),
        loss_bound=d.get("loss_bound", base.loss_bound),
    )


def config_hash(payload: dict) -> str:
    """Stable digest of a JSON-serializable payload."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def run_config_to_dict(
    config: CalibrationConfig,
    ladder: SourceLadder,
    method: str,
    records_path: str,
    out_path: str,
) -> dict:
    return {
        "format": "run_config",
        "config": config_to_dict(config),
        "ladder": ladder_to_dict(ladder),
        "method": method,
        "records": records_path,
        "out": out_path,
    }


def run_config_from_dict(d: dict) -> dict:
    """Parsed run configuration; referenced paths are checked by the caller."""
    if d.get("format") != "run_config":
        raise ValidationError("not a run config document")
    return {
        "config": config_from_dict(d["config"]),
        "ladder": ladder_from_dict(d["ladder"]) if d.get("ladder") else None,
        "method": d.get("method", "hypac"),
        "records": d.get("records"),
        "out": d.get("out"),
    }


def surface_to_dict(surface: Surface) -> dict:
    return {
        "num_sources": surface.num_sources,
        "grid": list(surface.grid),
        "cells": [list(c) for c in surface.cells],
        "r_is": surface.r_is.tolist(),
        "sigma_w": surface.sigma_w.tolist(),
        "ucb": surface.ucb.tolist(),
        "cost": surface.cost.tolist(),
    }


def surface_from_dict(d: dict) -> Surface:
    return Surface(
        num_sources=d["num_sources"],
        grid=tuple(d["grid"]),
        cells=tuple(tuple(c) for c in d["cells"]),
        r_is=np.asarray(d["r_is"], dtype=np.float64),
        sigma_w=np.asarray(d["sigma_w"], dtype=np.float64),
        ucb=np.asarray(d["ucb"], dtype=np.float64),
        cost=np.asarray(d["cost"], dtype=np.float64),
    )


def outcome_to_dict(
    outcome: CalibrationOutcome, config: CalibrationConfig, ladder: SourceLadder
) -> dict:
    cfg = config_to_dict(config)
    lad = ladder_to_dict(ladder)
    out = {
        "format": "calibration_outcome",
        "config": cfg,
        "ladder": lad,
        "config_hash": config_hash({"config": cfg, "ladder": lad}),
        "seed": config.seed,
        "thresholds": list(outcome.thresholds.u),
        "feasible_count": outcome.feasible_count,
        "ucb_at_selection": outcome.ucb_at_selection,
        "empirical_cost": outcome.empirical_cost,
        "fallback_used": outcome.fallback_used,
        "n_queried": outcome.n_queried,
    }
    if outcome.diagnostics is not None:
        out["diagnostics"] = surface_to_dict(outcome.diagnostics)
    return out


def outcome_from_dict(
    d: dict,
) -> tuple[CalibrationOutcome, CalibrationConfig, SourceLadder]:
    if d.get("format") != "calibration_outcome":
        raise ValidationError("not a calibration outcome document")
    outcome = CalibrationOutcome(
        thresholds=ThresholdVector(tuple(d["thresholds"])),
        feasible_count=d["feasible_count"],
        ucb_at_selection=d["ucb_at_selection"],
        empirical_cost=d["empirical_cost"],
        fallback_used=d["fallback_used"],
        n_queried=d.get("n_queried", 0),
        diagnostics=(
            surface_from_dict(d["diagnostics"]) if "diagnostics" in d else None
        ),
    )
    return outcome, config_from_dict(d["config"]), ladder_from_dict(d["ladder"])


def coverage_report_to_dict(r: CoverageReport) -> dict:
    scen = scenario_to_dict(r.scenario)
    cfg = config_to_dict(r.config)
    return {
        "format": "coverage_report",
        "scenario": scen,
        "config": cfg,
        "config_hash": config_hash({"scenario": scen, "config": cfg}),
        "master_seed": r.master_seed,
        "trials": r.trials,
        "violations": r.violations,
        "violation_rate": r.violation_rate,
        "mean_cost_savings": r.mean_cost_savings,
        "mean_error": r.mean_error,
        "mean_true_risk": r.mean_true_risk,
        "fallback_count": r.fallback_count,
        "per_trial": list(r.per_trial),
    }


def coverage_report_from_dict(d: dict) -> CoverageReport:
    if d.get("format") != "coverage_report":
        raise ValidationError("not a coverage report document")
    return CoverageReport(
        trials=d["trials"],
        violations=d["violations"],
        mean_cost_savings=d["mean_cost_savings"],
        mean_error=d["mean_error"],
        mean_true_risk=d["mean_true_risk"],
        fallback_count=d["fallback_count"],
        master_seed=d["master_seed"],
        scenario=scenario_from_dict(d["scenario"]),
        config=config_from_dict(d["config"]),
        per_trial=tuple(d["per_trial"]),
    )


def bound_check_report_to_dict(r: BoundCheckReport) -> dict:
    scen = scenario_to_dict(r.scenario)
    cfg = config_to_dict(r.config)
    return {
        "format": "bound_check_report",
        "scenario": scen,
        "config": cfg,
        "config_hash": config_hash({"scenario": scen, "config": cfg}),
        "master_seed": r.master_seed,
        "trials": r.trials,
        "n_test": r.n_test,
        "t": r.t,
        "fraction_within": r.fraction_within,
        "theoretical_bound": r.theoretical_bound,
    }


def comparison_report_to_dict(r: ComparisonReport) -> dict:
    scen = scenario_to_dict(r.scenario)
    cfg = config_to_dict(r.config)
    return {
        "format": "comparison_report",
        "scenario": scen,
        "config": cfg,
        "config_hash": config_hash({"scenario": scen, "config": cfg}),
        "master_seed": r.master_seed,
        "trials": r.trials,
        "rows": list(r.rows),
    }


def report_to_dict(obj: Any, **ctx: Any) -> dict:
    """Serialize any report-like object; outcomes need config= and ladder=."""
    if isinstance(obj, CalibrationOutcome):
        return outcome_to_dict(obj, ctx["config"], ctx["ladder"])
    if isinstance(obj, CoverageReport):
        return coverage_report_to_dict(obj)
    if isinstance(obj, BoundCheckReport):
        return bound_check_report_to_dict(obj)
    if isinstance(obj, ComparisonReport):
        return comparison_report_to_dict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(payload: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_json(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_report(obj: Any, path: str | Path, fmt: str = "json", **ctx: Any) -> None:
    """Write an outcome or report as JSON (full fidelity) or CSV (flat table)."""
    write_payload(report_to_dict(obj, **ctx), path, fmt)


def write_payload(payload: dict, path: str | Path, fmt: str = "json") -> None:
    if fmt == "json":
        write_json(payload, path)
        return
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        kind = payload["format"]
        if kind == "coverage_report":
            writer.writerow(
                [
                    "trial",
                    "thresholds",
                    "true_risk",
                    "test_error",
                    "cost_savings",
                    "fallback_used",
                    "violation",
                ]
            )
            for row in payload["per_trial"]:
                writer.writerow(
                    [
                        row["trial"],
                        ";".join(repr(v) for v in row["thresholds"]),
                        repr(row["true_risk"]),
                        repr(row["test_error"]),
                        repr(row["cost_savings"]),
                        row["fallback_used"],
                        row["violation"],
                    ]
                )
        elif kind == "comparison_report":
            writer.writerow(
                [
                    "method",
                    "violation_rate",
                    "mean_error",
                    "mean_cost_savings",
                    "fallback_rate",
                ]
            )
            for row in payload["rows"]:
                writer.writerow(
                    [
                        row["method"],
                        repr(row["violation_rate"]),
                        repr(row["mean_error"]),
                        repr(row["mean_cost_savings"]),
                        repr(row["fallback_rate"]),
                    ]
                )
        elif kind == "calibration_outcome":
            writer.writerow(
                [
                    "thresholds",
                    "feasible_count",
                    "ucb_at_selection",
                    "empirical_cost",
                    "fallback_used",
                    "n_queried",
                ]
            )
            writer.writerow(
                [
                    ";".join(repr(v) for v in payload["thresholds"]),
                    payload["feasible_count"],
                    repr(payload["ucb_at_selection"]),
                    repr(payload["empirical_cost"]),
                    payload["fallback_used"],
                    payload["n_queried"],
                ]
            )
        else:
            writer.writerow(sorted(payload))
            writer.writerow(
                [
                    payload[k] if not isinstance(payload[k], (dict, list)) else json.dumps(payload[k])
                    for k in sorted(payload)
                ]
            )
