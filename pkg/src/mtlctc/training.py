"""Minibatch Adam training with early stopping, adaptation and CER evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .alphabet import Alphabet
from .decoder import beam_search_decode, best_path_decode
from .metrics import edit_distance
from .model import TASK1, TASK2, Batch, ModelGraph, mtl_backward
from .nn.adam import AdamState, adam_step

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class EvaluationError(ValueError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 30
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    max_norm: float | None = None
    beam_width: int = 100

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrainingResult:
    model: ModelGraph
    adam: AdamState
    best_epoch: int
    best_val_loss: float
    epochs_run: int
    history: list = field(default_factory=list)

    def metadata(self) -> dict:
        return {"best_epoch": self.best_epoch, "best_val_loss": self.best_val_loss,
                "epochs_run": self.epochs_run}


def _batches(items, size):
    for i in range(0, len(items), size):
        yield Batch.from_items(items[i:i + size])


def _task2_stream(items, size, rng):
    while True:
        order = rng.permutation(len(items))
        for i in range(0, len(order), size):
            yield Batch.from_items([items[j] for j in order[i:i + size]])


def _snapshot(params: dict) -> dict:
    return {k: v.copy() for k, v in params.items()}


def _copy_adam(s: AdamState) -> AdamState:
    return AdamState(_snapshot(s.m), _snapshot(s.v), s.t, s.lr, s.beta1, s.beta2, s.eps)


def fit(model: ModelGraph, train1, cfg: TrainConfig, dev=None, train2=None, lam: float = 0.0,
        update_tasks=None, epochs: int | None = None, early_stopping: bool = True) -> TrainingResult:
    """Train ``model`` in place and return it restored to its best validation epoch.

    ``train1``/``dev`` feed task1; ``train2`` (multitask graphs only) is
    drawn one minibatch per task1 step and combined with weight ``lam``.
    Validation uses task1 loss on ``dev`` (or on ``train1`` when no dev set
    is given).  ``update_tasks`` limits updates to shared + those branches.
    """
    if len(train1) == 0:
        raise TrainingError("no feasible training utterances (all skipped or empty dataset)")
    if train1.alphabet != model.alphabet(TASK1):
        raise TrainingError("task1 data alphabet does not match the model's task1 alphabet")
    mtl = train2 is not None and lam > 0.0
    if mtl:
        if TASK2 not in model.branches:
            raise TrainingError("task2 data given for a graph without a task2 branch")
        if len(train2) == 0:
            raise TrainingError("no feasible task2 training utterances")
        if train2.alphabet != model.alphabet(TASK2):
            raise TrainingError("task2 data alphabet does not match the model's task2 alphabet")
    if update_tasks is None:
        update_tasks = [TASK1, TASK2] if mtl else [TASK1]
    params = model.parameters(tasks=update_tasks)
    adam = AdamState.for_params(params, lr=cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, 101])
    stream = _task2_stream(train2.items, cfg.batch_size, np.random.default_rng([cfg.seed, 102])) if mtl else None
    val_batch = Batch.from_items((dev if dev is not None and len(dev) else train1).items)
    n_epochs = cfg.max_epochs if epochs is None else epochs

    best = (np.inf, 0, _snapshot(params), _copy_adam(adam))
    since_best = 0
    history = []
    epoch = 0
    for epoch in range(1, n_epochs + 1):
        order = shuffle_rng.permutation(len(train1.items))
        items = [train1.items[i] for i in order]
        losses = []
        for batch in _batches(items, cfg.batch_size):
            if mtl:
                cost, grads = mtl_backward(model, batch, next(stream), lam)
            else:
                cost, grads = model.loss_and_grads(batch, TASK1)
            grads = {k: g for k, g in grads.items() if k in params}
            adam_step(params, grads, adam, cfg.max_norm)
            losses.append(cost)
        val = model.loss(val_batch, TASK1)
        history.append((epoch, float(np.mean(losses)), val))
        log.debug("epoch %d train %.4f val %.4f", epoch, np.mean(losses), val)
        if val < best[0]:
            best = (val, epoch, _snapshot(params), _copy_adam(adam))
            since_best = 0
        else:
            since_best += 1
            if early_stopping and since_best > cfg.patience:
                break
    if not early_stopping:
        best = (history[-1][2], epoch, _snapshot(params), _copy_adam(adam)) if history else best
    for k, v in best[2].items():
        params[k][...] = v
    return TrainingResult(model, best[3], best[1], float(best[0]), epoch, history)


def adapt(model: ModelGraph, data, epochs: int, cfg: TrainConfig, dev=None) -> ModelGraph:
    """Continue training shared + task1 parameters on new data with a fresh optimiser.

    Any task2 branch is left frozen.  With ``dev`` the best epoch on it is
    kept; otherwise the state after the last epoch is returned.
    """
    if data.alphabet != model.alphabet(TASK1):
        raise TrainingError("adaptation data alphabet does not match the model's task1 alphabet")
    adapted = model.copy()
    if epochs <= 0:
        return adapted
    fit(adapted, data, cfg, dev=dev, update_tasks=[TASK1], epochs=epochs,
        early_stopping=False if dev is None else True)
    return adapted


@dataclass
class EvalReport:
    cer: float
    edits: int
    ref_chars: int
    rows: list  # (utt_id, reference text, hypothesis text, edits, ref_len)

    def per_utterance_mean(self) -> float:
        return float(np.mean([r[3] / r[4] for r in self.rows if r[4] > 0]))


def decode_set(model: ModelGraph, data, beam_width: int = 100, task: str = TASK1,
               method: str = "beam") -> list:
    """``(utt_id, labels)`` for every item of a prepared set."""
    if data.alphabet != model.alphabet(task):
        raise EvaluationError("dataset alphabet is incompatible with the model")
    if not data.items:
        return []
    batch = Batch.from_items(data.items)
    lp = model.log_probs(batch.x, batch.offsets, task)
    out = []
    for i, uid in enumerate(batch.ids):
        O = lp[batch.offsets[i]:batch.offsets[i + 1]]
        labels = beam_search_decode(O, beam_width) if method == "beam" else best_path_decode(O)
        out.append((uid, labels))
    return out


def evaluate_cer(model: ModelGraph, data, beam_width: int = 100, task: str = TASK1) -> EvalReport:
    """Pooled CER: total edit distance over total reference symbols."""
    if not data.items:
        raise EvaluationError("cannot evaluate on an empty dataset")
    alphabet: Alphabet = data.alphabet
    refs = {uid: labels for uid, _, labels in data.items}
    rows = []
    edits = total = 0
    for uid, hyp in decode_set(model, data, beam_width, task):
        ref = refs[uid]
        e = edit_distance(ref, hyp)
        rows.append((uid, alphabet.decode(ref), alphabet.decode(hyp), e, len(ref)))
        edits += e
        total += len(ref)
    if total == 0:
        raise EvaluationError("references are all empty")
    return EvalReport(edits / total, edits, total, rows)
