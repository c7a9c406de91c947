"""Network topologies: single-task baseline, multitask graph, pre-training surgery.

Every graph is a shared trunk followed by one branch per task.  The
single-task baseline uses the same split point as the multitask graph
(FF, FF, BiLSTM | BiLSTM, FF, FF-softmax) so that its layer sequence, its
parameter names and its per-layer initialisation coincide with the main
path of the multitask model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alphabet import Alphabet
from .ctc import InfeasibleTargetError, ctc_loss_packed, log_softmax, min_frames
from .nn.layers import BILSTM, SOFTMAX, Layer, LayerSpec, bilstm, ff, init_layer_params, softmax_out

SINGLE = "single"
MTL = "mtl"
TASK1 = "task1"
TASK2 = "task2"

LARGE = "large"
SMALL = "small"
L1_ONLY = "l1"
L1_PLUS_L2 = "l1l2"

# independent RNG streams for per-layer initialisation
_MAIN_STREAM = 0
_HEAD_STREAM = 1
_TASK2_STREAM = 2


class ModelError(ValueError):
    pass


@dataclass
class ModelDims:
    input_dim: int = 234
    ff_units: int = 500
    lstm_cells: int = 300
    init_std: float = 0.04

    @classmethod
    def desk(cls, input_dim: int = 234) -> "ModelDims":
        return cls(input_dim=input_dim, ff_units=32, lstm_cells=16)

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "ff_units": self.ff_units,
                "lstm_cells": self.lstm_cells, "init_std": self.init_std}


@dataclass
class MtlConfig:
    lam: float = 0.3
    task2_size: str = SMALL
    task2_mode: str = L1_ONLY

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ModelError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.task2_size not in (LARGE, SMALL):
            raise ModelError(f"task2_size must be 'large' or 'small', got {self.task2_size!r}")
        if self.task2_mode not in (L1_ONLY, L1_PLUS_L2):
            raise ModelError(f"task2_mode must be 'l1' or 'l1l2', got {self.task2_mode!r}")


@dataclass
class Branch:
    layers: list
    alphabet: Alphabet


@dataclass
class Batch:
    """Utterances packed back to back along the time axis."""

    x: np.ndarray
    offsets: np.ndarray
    targets: list
    ids: list = field(default_factory=list)

    @classmethod
    def from_items(cls, items) -> "Batch":
        """``items``: iterable of ``(utt_id, inputs (T, D), labels)``."""
        items = list(items)
        if not items:
            raise ModelError("empty batch")
        ids = [i for i, _, _ in items]
        xs = [np.asarray(x, dtype=np.float64) for _, x, _ in items]
        offsets = np.zeros(len(xs) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(x) for x in xs])
        targets = [np.asarray(t, dtype=np.int64) for _, _, t in items]
        return cls(np.ascontiguousarray(np.concatenate(xs, axis=0)), offsets, targets, ids)

    def __len__(self) -> int:
        return len(self.targets)

    def check_feasible(self, task: str = "") -> None:
        lengths = np.diff(self.offsets)
        for i, (T, t) in enumerate(zip(lengths, self.targets)):
            need = min_frames(t)
            if need > T:
                uid = self.ids[i] if i < len(self.ids) else f"#{i}"
                where = f" ({task})" if task else ""
                raise InfeasibleTargetError(
                    f"utterance {uid!r}{where}: target too long for T (needs {need} frames, has {T})")


@dataclass
class Tape:
    model_id: int
    task: str
    records: list
    out_shape: tuple


def _main_path_specs(dims: ModelDims, n_symbols: int) -> list:
    F, H = dims.ff_units, dims.lstm_cells
    return [ff(dims.input_dim, F), ff(F, F), bilstm(F, H),
            bilstm(2 * H, H), ff(2 * H, F), softmax_out(F, n_symbols)]


def _init(specs, std, seed, stream, first_index=0) -> list:
    layers = []
    for i, spec in enumerate(specs):
        rng = np.random.default_rng([seed, stream, first_index + i])
        layers.append(Layer(spec, init_layer_params(spec, std, rng)))
    return layers


class ModelGraph:
    def __init__(self, shared: list, branches: dict, topology: str):
        if topology not in (SINGLE, MTL):
            raise ModelError(f"unknown topology {topology!r}")
        if TASK1 not in branches:
            raise ModelError("every graph needs a task1 branch")
        out_dim = shared[-1].spec.out_features if shared else None
        for task, br in branches.items():
            if not br.layers or br.layers[-1].kind != SOFTMAX:
                raise ModelError(f"branch {task!r} must end in a softmax-output layer")
            if br.layers[-1].spec.output_dim != len(br.alphabet):
                raise ModelError(f"branch {task!r} output size {br.layers[-1].spec.output_dim} "
                                 f"!= alphabet size {len(br.alphabet)}")
            if out_dim is not None and br.layers[0].spec.input_dim != out_dim:
                raise ModelError(f"branch {task!r} input dim {br.layers[0].spec.input_dim} "
                                 f"!= shared output dim {out_dim}")
            if any(l.kind == SOFTMAX for l in br.layers[:-1]):
                raise ModelError("softmax-output may only close a branch")
        if any(l.kind == SOFTMAX for l in shared):
            raise ModelError("softmax-output may not appear in the shared stack")
        self.shared = shared
        self.branches = branches
        self.topology = topology

    # -- structure ---------------------------------------------------------
    @property
    def tasks(self) -> list:
        return list(self.branches)

    def alphabet(self, task: str = TASK1) -> Alphabet:
        return self.branches[task].alphabet

    @property
    def input_dim(self) -> int:
        return self.shared[0].spec.input_dim if self.shared else self.branches[TASK1].layers[0].spec.input_dim

    def path(self, task: str = TASK1) -> list:
        return self.shared + self.branches[task].layers

    def layer_kinds(self, task: str = TASK1) -> list:
        return [l.kind for l in self.path(task)]

    def named_layers(self):
        for i, layer in enumerate(self.shared):
            yield f"shared.{i}", layer
        for task, br in self.branches.items():
            for i, layer in enumerate(br.layers):
                yield f"{task}.{i}", layer

    def parameters(self, tasks=None) -> dict:
        """Flat name -> array view.  ``tasks`` restricts to shared + those branches."""
        out = {}
        for prefix, layer in self.named_layers():
            owner = prefix.split(".")[0]
            if tasks is not None and owner != "shared" and owner not in tasks:
                continue
            for name, arr in layer.params.items():
                out[f"{prefix}.{name}"] = arr
        return out

    def n_params(self, task: str | None = None) -> int:
        if task is None:
            return sum(p.size for p in self.parameters().values())
        return sum(p.size for p in self.parameters(tasks=[task]).values())

    def copy(self) -> "ModelGraph":
        return ModelGraph([l.copy() for l in self.shared],
                          {t: Branch([l.copy() for l in b.layers], b.alphabet)
                           for t, b in self.branches.items()},
                          self.topology)

    def describe(self) -> dict:
        return {
            "topology": self.topology,
            "shared": [l.spec.to_dict() for l in self.shared],
            "branches": {t: {"layers": [l.spec.to_dict() for l in b.layers],
                             "alphabet": b.alphabet.to_list(),
                             "noise_marker": b.alphabet.noise_marker}
                         for t, b in self.branches.items()},
        }

    # -- computation -------------------------------------------------------
    def forward(self, x, offsets=None, task: str = TASK1):
        """Logits for every frame plus the tape needed by ``backward``."""
        if task not in self.branches:
            raise ModelError(f"no branch named {task!r}")
        x = np.asarray(x, dtype=np.float64)
        if offsets is None:
            offsets = np.array([0, x.shape[0]], dtype=np.int64)
        records = []
        h = x
        for prefix, layers in (("shared", self.shared), (task, self.branches[task].layers)):
            for i, layer in enumerate(layers):
                h, cache = layer.forward(h, offsets)
                records.append((f"{prefix}.{i}", layer, cache))
        return h, Tape(id(self), task, records, h.shape)

    def backward(self, tape: Tape, dlogits):
        """Exact parameter gradients for the recorded forward pass."""
        dlogits = np.asarray(dlogits, dtype=np.float64)
        if tape.model_id != id(self):
            raise ModelError("tape was recorded on a different model")
        if dlogits.shape != tape.out_shape:
            raise ModelError(f"upstream gradient shape {dlogits.shape} != output shape {tape.out_shape}")
        grads = {}
        d = dlogits
        for prefix, layer, cache in reversed(tape.records):
            d, g = layer.backward(cache, d)
            for name, arr in g.items():
                grads[f"{prefix}.{name}"] = arr
        return grads

    def log_probs(self, x, offsets=None, task: str = TASK1):
        logits, _ = self.forward(x, offsets, task)
        return log_softmax(logits)

    def loss_and_grads(self, batch: Batch, task: str = TASK1):
        """Mean CTC loss over the batch and its gradient for shared + ``task`` params."""
        batch.check_feasible(task)
        logits, tape = self.forward(batch.x, batch.offsets, task)
        losses, dlogits = ctc_loss_packed(log_softmax(logits), batch.offsets, batch.targets,
                                          blank=self.alphabet(task).blank)
        n = len(batch)
        return float(losses.sum() / n), self.backward(tape, dlogits / n)

    def loss(self, batch: Batch, task: str = TASK1) -> float:
        batch.check_feasible(task)
        lp = self.log_probs(batch.x, batch.offsets, task)
        losses, _ = ctc_loss_packed(lp, batch.offsets, batch.targets, blank=self.alphabet(task).blank)
        return float(losses.mean())


def build_single_task(dims: ModelDims, alphabet: Alphabet, seed: int = 0) -> ModelGraph:
    """FF, FF, BiLSTM, BiLSTM, FF, FF-softmax sized to ``alphabet``."""
    layers = _init(_main_path_specs(dims, len(alphabet)), dims.init_std, seed, _MAIN_STREAM)
    return ModelGraph(layers[:3], {TASK1: Branch(layers[3:], alphabet)}, SINGLE)


def _task2_specs(dims: ModelDims, n_symbols: int, size: str) -> list:
    F, H = dims.ff_units, dims.lstm_cells
    if size == LARGE:
        return [bilstm(2 * H, H), ff(2 * H, F), softmax_out(F, n_symbols)]
    return [ff(2 * H, F), softmax_out(F, n_symbols)]


def build_multitask(dims: ModelDims, alphabets: dict, config: MtlConfig, seed: int = 0) -> ModelGraph:
    """Shared FF, FF, BiLSTM; task1 branch BiLSTM, FF, FF-softmax; task2 large or small.

    Shared and task1 layers are initialised exactly as ``build_single_task``
    would with the same seed.
    """
    if len(alphabets) < 2 or TASK1 not in alphabets or TASK2 not in alphabets:
        raise ModelError("multitask graphs need 'task1' and 'task2' alphabets")
    main = _init(_main_path_specs(dims, len(alphabets[TASK1])), dims.init_std, seed, _MAIN_STREAM)
    second = _init(_task2_specs(dims, len(alphabets[TASK2]), config.task2_size),
                   dims.init_std, seed, _TASK2_STREAM)
    return ModelGraph(main[:3], {TASK1: Branch(main[3:], alphabets[TASK1]),
                                 TASK2: Branch(second, alphabets[TASK2])}, MTL)


def combined_cost(tc1: float, tc2: float, lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ModelError(f"lambda must lie in [0, 1], got {lam}")
    if not (np.isfinite(tc1) and np.isfinite(tc2)):
        raise ModelError(f"task costs must be finite, got {tc1}, {tc2}")
    return (1.0 - lam) * tc1 + lam * tc2


def mtl_backward(model: ModelGraph, batch1: Batch, batch2: Batch, lam: float):
    """Combined cost and gradients: task branches scaled by (1-lam) and lam, shared gets both."""
    if not 0.0 <= lam <= 1.0:
        raise ModelError(f"lambda must lie in [0, 1], got {lam}")
    if len(batch1) == 0 or len(batch2) == 0:
        raise ModelError("both task batches must be non-empty")
    batch1.check_feasible(TASK1)
    batch2.check_feasible(TASK2)
    tc1, g1 = model.loss_and_grads(batch1, TASK1)
    tc2, g2 = model.loss_and_grads(batch2, TASK2)
    grads = {}
    for name, g in g1.items():
        grads[name] = (1.0 - lam) * g
    for name, g in g2.items():
        if name in grads:
            grads[name] = grads[name] + lam * g
        else:
            grads[name] = lam * g
    return combined_cost(tc1, tc2, lam), grads


def truncate_for_pretraining(model: ModelGraph) -> list:
    """Keep the trained FF, FF, BiLSTM prefix (copied, bit-identical)."""
    if model.topology != SINGLE:
        raise ModelError("pre-training surgery expects a single-task model")
    return [l.copy() for l in model.shared]


def attach_new_head(shared: list, alphabet: Alphabet, seed: int = 0,
                    init_std: float | None = None) -> ModelGraph:
    """Append a freshly initialised BiLSTM, FF, FF-softmax head for ``alphabet``."""
    if len(shared) != 3 or [l.kind for l in shared] != ["ff", "ff", BILSTM]:
        raise ModelError(f"expected an FF, FF, BiLSTM stack, got {[l.kind for l in shared]}")
    F = shared[0].spec.output_dim
    H = shared[-1].spec.output_dim
    if init_std is None:
        init_std = 0.04
    specs = [bilstm(2 * H, H), ff(2 * H, F), softmax_out(F, len(alphabet))]
    head = _init(specs, init_std, seed, _HEAD_STREAM, first_index=3)
    return ModelGraph([l.copy() for l in shared], {TASK1: Branch(head, alphabet)}, SINGLE)


def main_path_model(model: ModelGraph) -> ModelGraph:
    """View of a multitask graph restricted to shared + task1 (arrays shared, not copied)."""
    return ModelGraph(model.shared, {TASK1: model.branches[TASK1]}, SINGLE)


def graph_from_description(desc: dict, params: dict) -> ModelGraph:
    def build(prefix, specs):
        layers = []
        for i, d in enumerate(specs):
            spec = LayerSpec.from_dict(d)
            layers.append(Layer(spec, {n: params[f"{prefix}.{i}.{n}"] for n in spec.param_shapes()}))
        return layers

    shared = build("shared", desc["shared"])
    branches = {t: Branch(build(t, b["layers"]),
                          Alphabet(b["alphabet"], noise_marker=b.get("noise_marker", "~")))
                for t, b in desc["branches"].items()}
    return ModelGraph(shared, branches, desc["topology"])
