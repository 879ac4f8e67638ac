"""Compiled betting kernel must agree bit-for-bit with the reference."""

import numpy as np
import pytest

from pacroute import UcbInput, ucb_betting
from pacroute._betting_fast import betting_ucb_batch


@pytest.mark.parametrize("alpha", [0.01, 0.05, 0.2])
@pytest.mark.parametrize("p", [0.5, 0.9, 1.0])
@pytest.mark.parametrize("use_running_t", [False, True])
def test_batch_matches_reference_exactly(alpha, p, use_running_t):
    rng = np.random.default_rng(99)
    b = 1.0
    for m in (1, 2, 7, 50, 300):
        cells = []
        for _ in range(6):
            hits = (rng.random(m) < rng.uniform(0.02, 0.6)).astype(float)
            z = (rng.random(m) < p).astype(float)
            cells.append(z * hits * (b / p))
        w = np.array(cells)
        batch = betting_ucb_batch(w, alpha, b, p, 400, use_running_t)
        for i in range(len(cells)):
            ref = ucb_betting(
                UcbInput(w[i], alpha, b, p),
                grid_size=400,
                use_running_t=use_running_t,
            )
            assert batch[i] == ref  # bit-identical by construction


def test_batch_with_nonunit_bound():
    rng = np.random.default_rng(5)
    b, p = 2.5, 0.8
    w = rng.random((4, 40)) * (b / p)
    batch = betting_ucb_batch(w, 0.05, b, p, 250)
    for i in range(4):
        assert batch[i] == ucb_betting(UcbInput(w[i], 0.05, b, p), grid_size=250)


def test_surface_chunking_boundaries(monkeypatch, rng):
    # force tiny chunks so flush logic crosses several boundaries
    import pacroute.calibration as cal_mod
    from pacroute import (
        CalibrationConfig,
        GridSpec,
        SourceLadder,
        apply_query_mask,
        ucb_surface,
    )
    from pacroute.calibration import build_grid

    from conftest import random_records

    monkeypatch.setattr(cal_mod, "_BETTING_CHUNK", 3)
    records = random_records(rng, 40, binary_losses=True)
    cfg = CalibrationConfig(
        grid=GridSpec("uniform", step=0.25), ucb_kind="betting", betting_grid_size=200
    )
    cal = apply_query_mask(records, 0.9, seed=1)
    grid = build_grid(cfg.grid)
    surface = ucb_surface(cal, grid, 3, cfg)
    # per-cell reference
    from pacroute import ThresholdVector, UcbInput as UI, weighted_losses

    for i, cell in enumerate(surface.cells):
        w = weighted_losses(cal, ThresholdVector(cell))
        ref = ucb_betting(UI(w, cfg.alpha, 1.0, 0.9), grid_size=200)
        assert surface.ucb[i] == ref
