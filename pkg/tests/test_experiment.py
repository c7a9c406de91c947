import json

import pytest

from mtlctc.config import GRID_SYSTEMS, ExperimentConfig
from mtlctc.experiment import RESULT_FIELDS, read_results, render_table, run_experiment_grid, summarize

TINY = {"preset": "desk",
        "model": {"ff_units": 8, "lstm_cells": 4},
        "train": {"max_epochs": 2, "beam_width": 3},
        "adapt_epochs": 1,
        "corpus": {"n_letters_a": 4, "n_letters_b": 4, "lexicon_size": 8,
                   "sizes": {"lang-A": [8, 3, 4], "lang-B": [8, 3, 0], "accented-A": [4, 3, 4]}}}


def tiny_config(**over):
    d = json.loads(json.dumps(TINY))
    d.update(over)
    return ExperimentConfig.from_dict(d)


def test_full_grid_rows_and_files(tmp_path):
    rows = run_experiment_grid(tiny_config(seeds=[0]), tmp_path)
    assert [r["system"] for r in rows] == list(GRID_SYSTEMS)
    mtl = [r for r in rows if r["system"].startswith("mtl-")]
    assert {(r["task2_size"], r["task2_mode"]) for r in mtl} == {
        ("large", "l1"), ("small", "l1"), ("large", "l1l2"), ("small", "l1l2")}
    back = read_results(tmp_path / "results.jsonl")
    assert back == rows
    assert all(list(r) == list(RESULT_FIELDS) for r in back)
    table = (tmp_path / "table.txt").read_text(encoding="utf-8")
    assert "Single Task" in table and "Adapted MTL" in table
    assert table == render_table(rows)


def test_lambda_zero_row_identical_to_single():
    cfg = tiny_config(seeds=[0, 1], systems=["single", "mtl-l1-small"], mtl={"lambda": 0.0})
    rows = run_experiment_grid(cfg)
    for seed in (0, 1):
        a, b = [r for r in rows if r["seed"] == seed]
        for key in ("cer_native", "cer_accented", "best_val_loss", "best_epoch"):
            assert a[key] == b[key]


def test_grid_results_byte_identical(tmp_path):
    cfg = tiny_config(seeds=[2], systems=["single", "mtl-l1l2-small", "adapted-single"])
    run_experiment_grid(cfg, tmp_path / "a")
    run_experiment_grid(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "results.jsonl").read_bytes() == (tmp_path / "b" / "results.jsonl").read_bytes()


def test_summarize_wins():
    rows = [{"seed": s, "system": n, "cer_native": 0.1, "cer_accented": c}
            for s, (n, c) in enumerate([("single", 0.5), ("mtl-l1-small", 0.4)] * 1)]
    rows = [{"seed": 0, "system": "single", "cer_native": 0.1, "cer_accented": 0.5},
            {"seed": 0, "system": "mtl-l1-small", "cer_native": 0.1, "cer_accented": 0.4},
            {"seed": 1, "system": "single", "cer_native": 0.1, "cer_accented": 0.3},
            {"seed": 1, "system": "mtl-l1-small", "cer_native": 0.1, "cer_accented": 0.35}]
    s = summarize(rows)
    assert s["mtl-l1-small"]["wins_vs_single"] == 1
    assert s["mtl-l1-small"]["cer_accented"] == pytest.approx(0.375)
