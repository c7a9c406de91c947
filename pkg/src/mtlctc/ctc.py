"""CTC objective in log space, plus a brute-force enumeration oracle.

Output matrices are time-major ``(T, |S|)`` arrays of log-probabilities.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from ._accel import USE_NUMBA, njit
from .decoder import collapse_alignment

NEG_INF = -np.inf


class CTCError(ValueError):
    pass


class InfeasibleTargetError(CTCError):
    pass


def softmax_frame(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def expand_with_blanks(target, blank: int = 0) -> np.ndarray:
    """(l1, l2, ...) -> (blank, l1, blank, l2, ..., blank)."""
    target = np.asarray(target, dtype=np.int64).reshape(-1)
    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = target
    return ext


def min_frames(target) -> int:
    """Shortest T able to emit ``target``: one frame per label plus a blank between repeats."""
    target = list(np.asarray(target).reshape(-1))
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def check_output_matrix(O, tol: float = 1e-9) -> np.ndarray:
    O = np.asarray(O, dtype=np.float64)
    if O.ndim != 2:
        raise CTCError(f"output matrix must be 2-D (T, |S|), got shape {O.shape}")
    if O.shape[0] and np.any(O > tol):
        raise CTCError("log-probabilities must be <= 0")
    if O.shape[0]:
        totals = np.logaddexp.reduce(O, axis=1)
        bad = np.flatnonzero(np.abs(np.expm1(totals)) > tol)
        if bad.size:
            raise CTCError(f"column {int(bad[0])} is not normalised "
                           f"(sum of probabilities = {math.exp(totals[bad[0]])!r})")
    return O


def _check_target(target, T: int, n_symbols: int, blank: int) -> np.ndarray:
    target = np.asarray(target, dtype=np.int64).reshape(-1)
    if np.any(target == blank):
        raise CTCError("target sequence must not contain the blank symbol")
    if target.size and (target.min() < 0 or target.max() >= n_symbols):
        raise CTCError("target contains indices outside the output matrix")
    need = min_frames(target)
    if need > T:
        raise InfeasibleTargetError(
            f"target too long for T: needs at least {need} frames, got T={T}")
    return target


# --- loop kernel (numba-compiled when enabled) ------------------------------

@njit
def _lse2(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit
def _ctc_one_loops(logp, ext, blank, grad):
    """Forward-backward for one utterance; writes d(loss)/d(logits) into ``grad``."""
    T = logp.shape[0]
    S = logp.shape[1]
    U = ext.shape[0]
    alpha = np.full((T, U), -np.inf)
    beta = np.full((T, U), -np.inf)
    alpha[0, 0] = logp[0, ext[0]]
    if U > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, T):
        for s in range(U):
            a = alpha[t - 1, s]
            if s >= 1:
                a = _lse2(a, alpha[t - 1, s - 1])
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                a = _lse2(a, alpha[t - 1, s - 2])
            if a != -np.inf:
                alpha[t, s] = a + logp[t, ext[s]]
    beta[T - 1, U - 1] = logp[T - 1, ext[U - 1]]
    if U > 1:
        beta[T - 1, U - 2] = logp[T - 1, ext[U - 2]]
    for t in range(T - 2, -1, -1):
        for s in range(U):
            b = beta[t + 1, s]
            if s + 1 < U:
                b = _lse2(b, beta[t + 1, s + 1])
            if s + 2 < U and ext[s] != blank and ext[s] != ext[s + 2]:
                b = _lse2(b, beta[t + 1, s + 2])
            if b != -np.inf:
                beta[t, s] = b + logp[t, ext[s]]
    ll = alpha[T - 1, U - 1]
    if U > 1:
        ll = _lse2(ll, alpha[T - 1, U - 2])
    for t in range(T):
        for k in range(S):
            grad[t, k] = math.exp(logp[t, k])
        if ll == -np.inf:
            continue
        for s in range(U):
            v = alpha[t, s] + beta[t, s]
            if v != -np.inf:
                grad[t, ext[s]] -= math.exp(v - logp[t, ext[s]] - ll)
    return -ll


@njit
def _ctc_packed_loops(logp, offsets, labels, label_offsets, blank, grad, losses):
    for i in range(offsets.shape[0] - 1):
        t0 = offsets[i]
        t1 = offsets[i + 1]
        l0 = label_offsets[i]
        l1 = label_offsets[i + 1]
        L = l1 - l0
        ext = np.full(2 * L + 1, blank, dtype=np.int64)
        for j in range(L):
            ext[2 * j + 1] = labels[l0 + j]
        losses[i] = _ctc_one_loops(logp[t0:t1], ext, blank, grad[t0:t1])


# --- vectorised numpy twin --------------------------------------------------

def _ctc_one_numpy(logp, ext, blank):
    T, S = logp.shape
    U = len(ext)
    skip = np.zeros(U, dtype=bool)
    if U > 2:
        skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    skip_back = np.zeros(U, dtype=bool)
    skip_back[:-2] = skip[2:]
    emit = logp[:, ext]
    alpha = np.full((T, U), NEG_INF)
    beta = np.full((T, U), NEG_INF)
    alpha[0, :2] = emit[0, :2]
    pad = np.full(2, NEG_INF)
    with np.errstate(invalid="ignore"):
        for t in range(1, T):
            prev = np.concatenate([pad, alpha[t - 1]])
            acc = np.logaddexp(prev[2:], prev[1:-1])
            acc = np.where(skip, np.logaddexp(acc, prev[:-2]), acc)
            alpha[t] = acc + emit[t]
        beta[T - 1, -2:] = emit[T - 1, -2:] if U > 1 else emit[T - 1, -1:]
        for t in range(T - 2, -1, -1):
            nxt = np.concatenate([beta[t + 1], pad])
            acc = np.logaddexp(nxt[:-2], nxt[1:-1])
            acc = np.where(skip_back, np.logaddexp(acc, nxt[2:]), acc)
            beta[t] = acc + emit[t]
        ll = np.logaddexp.reduce(alpha[T - 1, -2:]) if U > 1 else alpha[T - 1, -1]
        grad = np.exp(logp)
        if np.isfinite(ll):
            occ = np.exp(alpha + beta - emit - ll)
            np.add.at(grad, (slice(None), ext), -occ)
    return -float(ll), grad


# --- public API -------------------------------------------------------------

def ctc_loss(O, target, blank: int = 0):
    """Negative log-probability of ``target`` under output matrix ``O``.

    Returns ``(loss, grad)`` where ``grad`` is the derivative of the loss with
    respect to the pre-softmax logits that produced ``O``.
    """
    O = check_output_matrix(O)
    T, S = O.shape
    if T == 0:
        raise CTCError("output matrix has no frames")
    target = _check_target(target, T, S, blank)
    ext = expand_with_blanks(target, blank)
    if USE_NUMBA:
        grad = np.empty_like(O)
        loss = _ctc_one_loops(O, ext, blank, grad)
        return float(loss), grad
    return _ctc_one_numpy(O, ext, blank)


def ctc_loss_packed(logp, offsets, targets, blank: int = 0):
    """Per-utterance losses and logit gradients over a packed batch.

    ``logp`` stacks every utterance's (T_i, |S|) log-probabilities along
    axis 0 with boundaries ``offsets``; feasibility is the caller's job.
    """
    n = len(offsets) - 1
    losses = np.empty(n)
    if USE_NUMBA:
        labels = np.concatenate([np.asarray(t, dtype=np.int64) for t in targets]) \
            if n else np.zeros(0, dtype=np.int64)
        label_offsets = np.zeros(n + 1, dtype=np.int64)
        label_offsets[1:] = np.cumsum([len(t) for t in targets])
        grad = np.empty_like(logp)
        _ctc_packed_loops(logp, np.asarray(offsets, dtype=np.int64), labels,
                          label_offsets, blank, grad, losses)
        return losses, grad
    grad = np.empty_like(logp)
    for i in range(n):
        a, b = offsets[i], offsets[i + 1]
        losses[i], grad[a:b] = _ctc_one_numpy(logp[a:b], expand_with_blanks(targets[i], blank), blank)
    return losses, grad


def alignment_log_probability(O, alignment) -> float:
    O = np.asarray(O, dtype=np.float64)
    a = np.asarray(alignment, dtype=np.int64).reshape(-1)
    if len(a) != O.shape[0]:
        raise CTCError(f"alignment length {len(a)} does not match T={O.shape[0]}")
    return float(O[np.arange(len(a)), a].sum())


def alignment_probability(O, alignment) -> float:
    return math.exp(alignment_log_probability(O, alignment))


def ctc_loss_bruteforce(O, target, blank: int = 0, budget: int = 10**6) -> float:
    """Oracle: enumerate all |S|^T alignments and sum those collapsing to ``target``."""
    O = np.asarray(O, dtype=np.float64)
    T, S = O.shape
    if S ** T > budget:
        raise CTCError(f"|S|^T = {S}^{T} exceeds the enumeration budget {budget}")
    target = tuple(int(k) for k in np.asarray(target).reshape(-1))
    P = np.exp(O)
    terms = []
    for a in itertools.product(range(S), repeat=T):
        if tuple(collapse_alignment(a, blank)) == target:
            terms.append(math.prod(P[t, k] for t, k in enumerate(a)))
    total = math.fsum(terms)
    return -math.log(total) if total > 0 else math.inf
