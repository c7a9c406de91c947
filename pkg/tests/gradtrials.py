"""Seeded small-model gradient trials shared by the unit and acceptance suites."""
import numpy as np

from mtlctc.ctc import ctc_loss_packed, log_softmax, min_frames
from mtlctc.nn.gradcheck import finite_difference_check
from mtlctc.nn.layers import (bilstm, bilstm_backward, bilstm_forward, feedforward_backward,
                              feedforward_forward, ff, init_layer_params, softmax_out)


def _init(spec, rng, std=0.5):
    return init_layer_params(spec, std, rng)


def feedforward_trial(seed: int) -> float:
    rng = np.random.default_rng([seed, 1])
    D, K = int(rng.integers(2, 6)), int(rng.integers(2, 5))
    act = "tanh" if seed % 2 == 0 else "linear"
    params = _init(ff(D, K, act), rng)
    x = rng.normal(size=(int(rng.integers(1, 6)), D))
    w = rng.normal(size=(x.shape[0], K))

    def loss_and_grad():
        y, cache = feedforward_forward(params, x, act)
        _, g = feedforward_backward(params, cache, w)
        return float(np.sum(w * y)), g

    return finite_difference_check(loss_and_grad, params)


def bilstm_trial(seed: int) -> float:
    rng = np.random.default_rng([seed, 2])
    D, H = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    params = _init(bilstm(D, H), rng)
    lengths = rng.integers(1, 5, size=int(rng.integers(1, 3)))
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    x = rng.normal(size=(int(offsets[-1]), D))
    w = rng.normal(size=(x.shape[0], 2 * H))

    def loss_and_grad():
        y, cache = bilstm_forward(params, x, offsets)
        _, g = bilstm_backward(params, cache, w)
        return float(np.sum(w * y)), g

    return finite_difference_check(loss_and_grad, params)


def softmax_ctc_trial(seed: int) -> float:
    """Hidden FF feeding the fused softmax-output + CTC head."""
    rng = np.random.default_rng([seed, 3])
    D, F, S = int(rng.integers(2, 5)), int(rng.integers(2, 5)), int(rng.integers(2, 5))
    hid = _init(ff(D, F), rng)
    out = _init(softmax_out(F, S), rng)
    params = {**{f"h.{k}": v for k, v in hid.items()}, **{f"o.{k}": v for k, v in out.items()}}
    targets, lengths = [], []
    for _ in range(int(rng.integers(1, 3))):
        t = rng.integers(1, S, size=int(rng.integers(0, 3)))
        targets.append(t)
        lengths.append(max(min_frames(t), 1) + int(rng.integers(0, 3)))
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    x = rng.normal(size=(int(offsets[-1]), D))

    def loss_and_grad():
        hp = {k[2:]: v for k, v in params.items() if k.startswith("h.")}
        op = {k[2:]: v for k, v in params.items() if k.startswith("o.")}
        h, c1 = feedforward_forward(hp, x, "tanh")
        z, c2 = feedforward_forward(op, h, "linear")
        losses, dz = ctc_loss_packed(log_softmax(z), offsets, targets)
        dh, go = feedforward_backward(op, c2, dz)
        _, gh = feedforward_backward(hp, c1, dh)
        grads = {**{f"h.{k}": v for k, v in gh.items()}, **{f"o.{k}": v for k, v in go.items()}}
        return float(losses.sum()), grads

    return finite_difference_check(loss_and_grad, params)


TRIALS = {"feedforward": feedforward_trial, "bilstm": bilstm_trial, "softmax+ctc": softmax_ctc_trial}
