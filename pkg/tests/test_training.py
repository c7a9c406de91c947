import numpy as np
import pytest

from mtlctc.alphabet import Alphabet
from mtlctc.data import PreparedSet
from mtlctc.model import TASK1, TASK2, Batch, ModelDims, MtlConfig, build_multitask, build_single_task
from mtlctc.nn.adam import NonFiniteGradientError
from mtlctc.training import EvaluationError, TrainConfig, TrainingError, adapt, decode_set, evaluate_cer, fit

DIMS = ModelDims(ff_units=8, lstm_cells=4)
OTHER = Alphabet.from_letters("wxyz")
CFG = TrainConfig(lr=0.01, batch_size=4, max_epochs=6, patience=2, seed=0, beam_width=4)


def test_fit_is_deterministic(tiny):
    s = tiny["sets"]
    runs = []
    for _ in range(2):
        m = build_single_task(DIMS, tiny["A"], seed=1)
        r = fit(m, s[("lang-A", "train")], CFG, dev=s[("lang-A", "dev")])
        runs.append((r.best_val_loss, [h[2] for h in r.history],
                     b"".join(v.tobytes() for v in m.parameters().values())))
    assert runs[0] == runs[1]


def test_fit_restores_best_epoch(tiny):
    s = tiny["sets"]
    m = build_single_task(DIMS, tiny["A"], seed=1)
    r = fit(m, s[("lang-A", "train")], CFG, dev=s[("lang-A", "dev")])
    vals = [h[2] for h in r.history]
    assert r.best_val_loss == min(vals)
    assert r.best_epoch == 1 + int(np.argmin(vals))
    assert m.loss(Batch.from_items(s[("lang-A", "dev")].items)) == pytest.approx(r.best_val_loss, abs=1e-12)


def test_patience_zero_stops_after_first_bad_epoch(tiny):
    s = tiny["sets"]
    cfg = TrainConfig(lr=0.5, batch_size=4, max_epochs=30, patience=0, seed=0)
    m = build_single_task(DIMS, tiny["A"], seed=1)
    r = fit(m, s[("lang-A", "train")], cfg, dev=s[("lang-A", "dev")])
    vals = [h[2] for h in r.history]
    first_bad = next(i for i in range(1, len(vals)) if vals[i] >= min(vals[:i]))
    assert r.epochs_run == first_bad + 1


def test_training_reduces_loss(tiny):
    s = tiny["sets"]
    m = build_single_task(DIMS, tiny["A"], seed=1)
    batch = Batch.from_items(s[("lang-A", "train")].items)
    before = m.loss(batch)
    fit(m, s[("lang-A", "train")], CFG)
    assert m.loss(batch) < before


def test_nonfinite_gradient_is_fatal(tiny):
    m = build_single_task(DIMS, tiny["A"], seed=1)
    m.shared[0].params["W"][0, 0] = np.nan
    with pytest.raises(NonFiniteGradientError):
        fit(m, tiny["sets"][("lang-A", "train")], CFG)


def test_empty_or_mismatched_data_rejected(tiny):
    m = build_single_task(DIMS, tiny["A"], seed=1)
    with pytest.raises(TrainingError):
        fit(m, PreparedSet(tiny["A"]), CFG)
    with pytest.raises(TrainingError):
        fit(m, PreparedSet(OTHER, tiny["sets"][("lang-B", "train")].items), CFG)


def test_mtl_fit_updates_both_branches(tiny):
    s = tiny["sets"]
    m = build_multitask(DIMS, {TASK1: tiny["A"], TASK2: tiny["B"]}, MtlConfig(0.3, "small"), seed=1)
    before = {k: v.copy() for k, v in m.parameters().items()}
    fit(m, s[("lang-A", "train")], CFG, train2=s[("lang-B", "train")], lam=0.3, epochs=1, early_stopping=False)
    after = m.parameters()
    assert any(not np.array_equal(before[k], after[k]) for k in after if k.startswith(TASK2))


def test_lambda_zero_mtl_equals_single_task(tiny):
    s = tiny["sets"]
    single = build_single_task(DIMS, tiny["A"], seed=4)
    multi = build_multitask(DIMS, {TASK1: tiny["A"], TASK2: tiny["B"]}, MtlConfig(0.0, "small"), seed=4)
    r1 = fit(single, s[("lang-A", "train")], CFG, dev=s[("lang-A", "dev")])
    r2 = fit(multi, s[("lang-A", "train")], CFG, dev=s[("lang-A", "dev")], train2=s[("lang-B", "train")], lam=0.0)
    assert r1.best_val_loss == r2.best_val_loss
    p1, p2 = single.parameters(), multi.parameters(tasks=[TASK1])
    assert all(p1[k].tobytes() == p2[k].tobytes() for k in p1)


def test_adapt_zero_epochs_is_identity(tiny):
    m = build_single_task(DIMS, tiny["A"], seed=1)
    out = adapt(m, tiny["sets"][("accented-A", "train")], 0, CFG)
    assert out is not m
    assert all(out.parameters()[k].tobytes() == v.tobytes() for k, v in m.parameters().items())


def test_adapt_reduces_training_loss(tiny):
    data = tiny["sets"][("accented-A", "train")]
    m = build_single_task(DIMS, tiny["A"], seed=1)
    batch = Batch.from_items(data.items)
    out = adapt(m, data, 50, CFG)
    assert out.loss(batch) < m.loss(batch)


def test_adapt_freezes_task2_and_checks_alphabet(tiny):
    s = tiny["sets"]
    m = build_multitask(DIMS, {TASK1: tiny["A"], TASK2: tiny["B"]}, MtlConfig(0.3, "small"), seed=1)
    out = adapt(m, s[("accented-A", "train")], 3, CFG)
    for k, v in m.parameters().items():
        same = out.parameters()[k].tobytes() == v.tobytes()
        assert same == k.startswith(TASK2)
    with pytest.raises(TrainingError):
        adapt(m, PreparedSet(OTHER, s[("accented-A", "train")].items), 1, CFG)


def test_evaluate_cer_pooled(tiny):
    data = tiny["sets"][("lang-A", "test")]
    m = build_single_task(DIMS, tiny["A"], seed=1)
    rep = evaluate_cer(m, data, beam_width=3)
    assert rep.cer == pytest.approx(rep.edits / rep.ref_chars)
    assert rep.edits == sum(r[3] for r in rep.rows)
    assert len(rep.rows) == len(data)
    with pytest.raises(EvaluationError):
        evaluate_cer(m, PreparedSet(tiny["A"]))
    with pytest.raises(EvaluationError):
        decode_set(m, PreparedSet(OTHER, data.items))
