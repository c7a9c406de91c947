"""Feedforward and bidirectional LSTM layers with hand-written gradients.

Layers run on packed batches: an ``(N, D)`` array holding every frame of
every utterance back to back, with utterance boundaries in ``offsets``.
Forward calls return the output together with a cache that the matching
backward call consumes, so a frozen layer can serve several threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _lstm

FF = "ff"
BILSTM = "bilstm"
SOFTMAX = "ff-softmax"
KINDS = (FF, BILSTM, SOFTMAX)

ACTIVATIONS = ("tanh", "linear")


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """``output_dim`` of a bilstm is cells per direction; it emits twice that."""

    kind: str
    input_dim: int
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.input_dim <= 0 or self.output_dim <= 0:
            raise ValueError(f"layer dims must be positive: {self}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def out_features(self) -> int:
        return 2 * self.output_dim if self.kind == BILSTM else self.output_dim

    def param_shapes(self) -> dict:
        if self.kind == BILSTM:
            H, D = self.output_dim, self.input_dim
            shapes = {}
            for d in ("fwd", "bwd"):
                shapes[f"{d}.Wx"] = (D, 4 * H)
                shapes[f"{d}.Wh"] = (H, 4 * H)
                shapes[f"{d}.b"] = (4 * H,)
            return shapes
        return {"W": (self.input_dim, self.output_dim), "b": (self.output_dim,)}

    def n_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.param_shapes().values())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "input_dim": self.input_dim,
                "output_dim": self.output_dim, "activation": self.activation}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(d["kind"], int(d["input_dim"]), int(d["output_dim"]), d.get("activation", "tanh"))


def ff(input_dim, output_dim, activation="tanh") -> LayerSpec:
    return LayerSpec(FF, input_dim, output_dim, activation)


def bilstm(input_dim, cells) -> LayerSpec:
    return LayerSpec(BILSTM, input_dim, cells)


def softmax_out(input_dim, n_symbols) -> LayerSpec:
    return LayerSpec(SOFTMAX, input_dim, n_symbols, "linear")


def init_layer_params(spec: LayerSpec, std: float, rng: np.random.Generator) -> dict:
    """Every weight and bias i.i.d. Normal(0, std**2)."""
    return {name: rng.normal(0.0, std, size=shape) if std > 0 else np.zeros(shape)
            for name, shape in spec.param_shapes().items()}


def init_params(specs, std: float = 0.04, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [init_layer_params(s, std, rng) for s in specs]


def _check_input(x, dim, what):
    if x.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"{what} expects input of dim {dim}, got shape {x.shape}")


def feedforward_forward(params: dict, x, activation: str = "tanh"):
    """Per-frame ``act(x @ W + b)``; returns ``(y, cache)``."""
    x = np.asarray(x, dtype=np.float64)
    _check_input(x, params["W"].shape[0], "feedforward layer")
    a = x @ params["W"] + params["b"]
    y = np.tanh(a) if activation == "tanh" else a
    return y, (x, y, activation)


def feedforward_backward(params: dict, cache, dy):
    x, y, activation = cache
    da = dy * (1.0 - y * y) if activation == "tanh" else dy
    grads = {"W": x.T @ da, "b": da.sum(axis=0)}
    return da @ params["W"].T, grads


def _as_offsets(offsets, n_rows):
    if offsets is None:
        return np.array([0, n_rows], dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64)
    if offsets[0] != 0 or offsets[-1] != n_rows or np.any(np.diff(offsets) < 0):
        raise ShapeError(f"offsets {offsets.tolist()} do not partition {n_rows} rows")
    return offsets


def bilstm_forward(params: dict, x, offsets=None):
    """Both directions over every utterance, outputs concatenated as [fwd | bwd].

    Initial hidden and cell states are zero.  Returns ``(y, cache)``.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_input(x, params["fwd.Wx"].shape[0], "bilstm layer")
    offsets = _as_offsets(offsets, x.shape[0])
    H = params["fwd.Wh"].shape[0]
    N = x.shape[0]
    outs, states = [], []
    for d, reverse in (("fwd", False), ("bwd", True)):
        xproj = np.ascontiguousarray(x @ params[f"{d}.Wx"] + params[f"{d}.b"])
        h = np.zeros((N, H))
        c = np.zeros((N, H))
        gates = np.zeros((N, 4 * H))
        _lstm.lstm_forward(xproj, np.ascontiguousarray(params[f"{d}.Wh"]), offsets, reverse, h, c, gates)
        outs.append(h)
        states.append((h, c, gates))
    return np.concatenate(outs, axis=1), (x, offsets, states)


def bilstm_backward(params: dict, cache, dy):
    x, offsets, states = cache
    H = params["fwd.Wh"].shape[0]
    dy = np.ascontiguousarray(dy)
    dx = np.zeros_like(x)
    grads = {}
    for (d, reverse), (h, c, gates), sl in zip((("fwd", False), ("bwd", True)), states,
                                               (slice(0, H), slice(H, 2 * H))):
        dz = np.zeros_like(gates)
        dWh = np.zeros((H, 4 * H))
        _lstm.lstm_backward(np.ascontiguousarray(dy[:, sl]), gates, c, h,
                            np.ascontiguousarray(params[f"{d}.Wh"]), offsets, reverse, dz, dWh)
        grads[f"{d}.Wx"] = x.T @ dz
        grads[f"{d}.Wh"] = dWh
        grads[f"{d}.b"] = dz.sum(axis=0)
        dx += dz @ params[f"{d}.Wx"].T
    return dx, grads


class Layer:
    """A LayerSpec bound to its parameter arrays."""

    def __init__(self, spec: LayerSpec, params: dict):
        shapes = spec.param_shapes()
        if set(shapes) != set(params):
            raise ShapeError(f"parameter names {sorted(params)} do not match {sorted(shapes)}")
        for name, shape in shapes.items():
            if params[name].shape != tuple(shape):
                raise ShapeError(f"{name}: expected shape {shape}, got {params[name].shape}")
        self.spec = spec
        self.params = params

    @property
    def kind(self) -> str:
        return self.spec.kind

    def forward(self, x, offsets=None):
        if self.spec.kind == BILSTM:
            return bilstm_forward(self.params, x, offsets)
        return feedforward_forward(self.params, x, self.spec.activation)

    def backward(self, cache, dy):
        if self.spec.kind == BILSTM:
            return bilstm_backward(self.params, cache, dy)
        return feedforward_backward(self.params, cache, dy)

    def copy(self) -> "Layer":
        return Layer(self.spec, {k: v.copy() for k, v in self.params.items()})

    def __repr__(self):
        return f"Layer({self.spec.kind}, {self.spec.input_dim}->{self.spec.out_features})"
