"""Record files, report serialization, round-trip fidelity."""

import json

import numpy as np
import pytest

from pacroute import (
    CalibrationConfig,
    GridSpec,
    SourceLadder,
    SyntheticScenario,
    calibrate,
    generate,
    pac_coverage_experiment,
)
from pacroute import io

from conftest import make_record, random_records

LADDER3 = SourceLadder.default(3)


class TestRecordFiles:
    def _random_full_records(self, rng, n=25, masked=True):
        recs = random_records(rng, n)
        if not masked:
            return recs
        return [
            make_record(
                r.id,
                r.score,
                r.losses,
                r.costs,
                z=int(rng.random() < 0.9),
                p=0.9,
            )
            for r in recs
        ]

    @pytest.mark.parametrize("fmt", ["jsonl", "csv"])
    @pytest.mark.parametrize("masked", [True, False])
    def test_round_trip_bit_identical(self, tmp_path, rng, fmt, masked):
        recs = self._random_full_records(rng, masked=masked)
        path = tmp_path / f"records.{fmt}"
        io.write_records(recs, path)
        back = io.parse_records(path)
        assert back == recs  # dataclass equality compares every float exactly

    def test_malformed_json_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"id": "a", "score": 0.5, "losses": [0,0,0], "costs": [1,2,8]}\n'
            "not json\n"
        )
        with pytest.raises(io.RecordFileError, match="line 2"):
            io.parse_records(path)

    def test_wrong_vector_length_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"id": "a", "score": 0.5, "losses": [0,0,0], "costs": [1,2,8]}\n'
            '{"id": "b", "score": 0.5, "losses": [0,0], "costs": [1,2,8]}\n'
        )
        with pytest.raises(io.RecordFileError, match="line 2"):
            io.parse_records(path)

    def test_inconsistent_sources_across_lines(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"id": "a", "score": 0.5, "losses": [0,0,0], "costs": [1,2,8]}\n'
            '{"id": "b", "score": 0.5, "losses": [0,0], "costs": [1,8]}\n'
        )
        with pytest.raises(io.RecordFileError, match="inconsistent"):
            io.parse_records(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(io.RecordFileError, match="no records"):
            io.parse_records(path)

    def test_unknown_suffix_rejected(self, tmp_path):
        path = tmp_path / "records.txt"
        path.write_text("x")
        with pytest.raises(io.RecordFileError):
            io.parse_records(path)

    def test_csv_header_layout(self, tmp_path, rng):
        recs = self._random_full_records(rng, n=3)
        path = tmp_path / "records.csv"
        io.write_records(recs, path)
        header = path.read_text().splitlines()[0]
        assert header == "id,score,loss_0,loss_1,loss_2,cost_0,cost_1,cost_2,z,p"


class TestOutcomeSerialization:
    def _outcome(self, rng, diagnostics=False):
        records = random_records(rng, 30, binary_losses=True)
        cfg = CalibrationConfig(grid=GridSpec("uniform", step=0.25), epsilon=0.4)
        out = calibrate(records, LADDER3, cfg, keep_diagnostics=diagnostics)
        return out, cfg

    def test_round_trip_exact(self, tmp_path, rng):
        out, cfg = self._outcome(rng)
        path = tmp_path / "outcome.json"
        io.write_report(out, path, config=cfg, ladder=LADDER3)
        back, cfg_back, ladder_back = io.outcome_from_dict(io.read_json(path))
        assert back == out
        assert cfg_back == cfg
        assert ladder_back == LADDER3

    def test_diagnostics_round_trip(self, tmp_path, rng):
        out, cfg = self._outcome(rng, diagnostics=True)
        path = tmp_path / "outcome.json"
        io.write_report(out, path, config=cfg, ladder=LADDER3)
        back, _, _ = io.outcome_from_dict(io.read_json(path))
        assert back.diagnostics is not None
        assert back.diagnostics.cells == out.diagnostics.cells
        assert np.array_equal(back.diagnostics.ucb, out.diagnostics.ucb)
        assert np.array_equal(back.diagnostics.cost, out.diagnostics.cost)

    def test_embeds_hash_and_seed(self, tmp_path, rng):
        out, cfg = self._outcome(rng)
        path = tmp_path / "outcome.json"
        io.write_report(out, path, config=cfg, ladder=LADDER3)
        payload = io.read_json(path)
        assert payload["seed"] == cfg.seed
        assert payload["config_hash"] == io.config_hash(
            {
                "config": io.config_to_dict(cfg),
                "ladder": io.ladder_to_dict(LADDER3),
            }
        )

    def test_outcome_csv_variant(self, tmp_path, rng):
        out, cfg = self._outcome(rng)
        path = tmp_path / "outcome.csv"
        io.write_report(out, path, fmt="csv", config=cfg, ladder=LADDER3)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("thresholds,feasible_count,ucb_at_selection")


class TestCoverageReportSerialization:
    def test_round_trip(self, tmp_path):
        scen = SyntheticScenario(n_cal=40, n_test=20, seed=5)
        cfg = CalibrationConfig(grid=GridSpec("uniform", step=0.25))
        rep = pac_coverage_experiment(scen, cfg, 100, master_seed=7)
        path = tmp_path / "report.json"
        io.write_report(rep, path)
        back = io.coverage_report_from_dict(io.read_json(path))
        assert back == rep

    def test_repeat_writes_are_byte_identical(self, tmp_path):
        scen = SyntheticScenario(n_cal=40, n_test=20, seed=5)
        cfg = CalibrationConfig(grid=GridSpec("uniform", step=0.25))
        rep = pac_coverage_experiment(scen, cfg, 100, master_seed=7)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        io.write_report(rep, a)
        io.write_report(rep, b)
        assert a.read_bytes() == b.read_bytes()

    def test_csv_table(self, tmp_path):
        scen = SyntheticScenario(n_cal=40, n_test=20, seed=5)
        cfg = CalibrationConfig(grid=GridSpec("uniform", step=0.25))
        rep = pac_coverage_experiment(scen, cfg, 100, master_seed=7)
        path = tmp_path / "report.csv"
        io.write_report(rep, path, fmt="csv")
        lines = path.read_text().splitlines()
        assert lines[0].split(",")[0] == "trial"
        assert len(lines) == 101


class TestScenarioSerialization:
    def test_round_trip(self):
        scen = SyntheticScenario(
            num_sources=4,
            loss_coef=(1.0, 0.4, 0.1),
            loss_power=(2.0, 2.0, 2.0),
            costs=(1.0, 2.0, 4.0, 16.0),
            score_dist=("beta", 2.0, 5.0),
        )
        assert io.scenario_from_dict(io.scenario_to_dict(scen)) == scen

    def test_config_round_trip(self):
        cfg = CalibrationConfig(
            epsilon=0.1,
            alpha=0.01,
            query_prob=0.75,
            loss_bound=2.0,
            grid=GridSpec("explicit", values=(0.25, 0.5)),
            ucb_kind="betting",
            seed=9,
            betting_grid_size=500,
            betting_lambda_running_t=True,
        )
        assert io.config_from_dict(io.config_to_dict(cfg)) == cfg
