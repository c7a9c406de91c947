"""Time the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5] [--e2e]

Kernel timings call both variants directly in one process (numba must be
installed and enabled).  ``--e2e`` additionally times one training step of
a desk-size model in two subprocesses, with ``MTLCTC_NUMBA=1`` and ``=0``.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mtlctc import ctc, metrics
from mtlctc._accel import USE_NUMBA
from mtlctc.nn import _lstm


def _ctc_case(rng, T=150, S=29, L=40):
    logp = ctc.log_softmax(rng.normal(size=(T, S)))
    ext = ctc.expand_with_blanks(rng.integers(1, S, size=L))
    grad = np.empty_like(logp)
    return (lambda: ctc._ctc_one_loops(logp, ext, 0, grad),
            lambda: ctc._ctc_one_numpy(logp, ext, 0))


def _lstm_case(rng, lengths=(40,) * 30, H=16):
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    N = int(offsets[-1])
    xproj = rng.normal(size=(N, 4 * H))
    Wh = rng.normal(size=(H, 4 * H)) * 0.1
    dh = rng.normal(size=(N, H))

    def run(fwd, bwd):
        def go():
            h, c, g = np.zeros((N, H)), np.zeros((N, H)), np.zeros((N, 4 * H))
            fwd(xproj, Wh, offsets, False, h, c, g)
            bwd(dh, g, c, h, Wh, offsets, False, np.zeros((N, 4 * H)), np.zeros((H, 4 * H)))
        return go

    return (run(_lstm.lstm_forward_loops, _lstm.lstm_backward_loops),
            run(_lstm.lstm_forward_numpy, _lstm.lstm_backward_numpy))


def _edit_case(rng, n=300):
    a = rng.integers(0, 29, size=n)
    b = rng.integers(0, 29, size=n + 7)
    return (lambda: metrics._edit_distance_loops(a, b),
            lambda: metrics._edit_distance_numpy(a, b))


_E2E = """
import time, numpy as np
from mtlctc.alphabet import Alphabet
from mtlctc.model import Batch, ModelDims, build_single_task
rng = np.random.default_rng(0)
m = build_single_task(ModelDims.desk(), Alphabet.english(), seed=0)
b = Batch.from_items([(str(i), rng.normal(size=(33, 234)), rng.integers(1, 29, size=10)) for i in range(30)])
m.loss_and_grads(b)
t = time.perf_counter()
for _ in range(5):
    m.loss_and_grads(b)
print((time.perf_counter() - t) / 5)
"""


def _e2e(flag: str) -> float:
    env = dict(os.environ, MTLCTC_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--e2e", action="store_true", help="also time a full training step per backend")
    args = ap.parse_args(argv)
    if not USE_NUMBA:
        print("numba is disabled (MTLCTC_NUMBA=0 or not installed); kernel comparison needs it", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    cases = {
        "ctc forward-backward (T=150, |S|=29, L=40)": _ctc_case(rng),
        "lstm fwd+bwd (30 utts x 40 frames, H=16)": _lstm_case(rng),
        "edit distance (300 x 307)": _edit_case(rng),
    }
    print(f"{'kernel':<46}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, (fast, slow) in cases.items():
        fast()  # compile outside the timed region
        tf = min(timeit.repeat(fast, number=3, repeat=args.repeat)) / 3
        ts = min(timeit.repeat(slow, number=3, repeat=args.repeat)) / 3
        print(f"{name:<46}{1e3 * tf:>10.3f}{1e3 * ts:>10.3f}{ts / tf:>8.1f}x")
    if args.e2e:
        nb, npy = _e2e("1"), _e2e("0")
        print(f"{'training step, desk model, batch 30':<46}{1e3 * nb:>10.1f}{1e3 * npy:>10.1f}{npy / nb:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
