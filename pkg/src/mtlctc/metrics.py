"""Levenshtein distance and character error rate."""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


class MetricError(ValueError):
    pass


@njit
def _edit_distance_loops(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            best = sub if sub < dele else dele
            cur[j] = best if best < ins else ins
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m]


def _edit_distance_numpy(a, b):
    m = len(b)
    j = np.arange(m + 1)
    prev = j.copy()
    for i in range(1, len(a) + 1):
        cand = np.empty(m + 1, dtype=np.int64)
        cand[0] = i
        cand[1:] = np.minimum(prev[:-1] + (b != a[i - 1]), prev[1:] + 1)
        # insertions: cur[j] = min_k cand[k] + (j - k)
        prev = np.minimum.accumulate(cand - j) + j
    return int(prev[m])


def _as_codes(seq) -> np.ndarray:
    if isinstance(seq, str):
        return np.array([ord(ch) for ch in seq], dtype=np.int64)
    return np.asarray(list(seq), dtype=np.int64).reshape(-1)


def edit_distance(reference, hypothesis) -> int:
    """Unit-cost Levenshtein distance between two strings or label sequences."""
    a, b = _as_codes(reference), _as_codes(hypothesis)
    if USE_NUMBA:
        return int(_edit_distance_loops(a, b))
    return _edit_distance_numpy(a, b)


def cer(reference, hypothesis) -> float:
    if len(reference) == 0:
        raise MetricError("CER is undefined for an empty reference")
    return edit_distance(reference, hypothesis) / len(reference)


def pooled_cer(references, hypotheses) -> float:
    """Total edits over total reference length (not the mean of per-utterance rates)."""
    references, hypotheses = list(references), list(hypotheses)
    if len(references) != len(hypotheses):
        raise MetricError("reference and hypothesis counts differ")
    total = sum(len(r) for r in references)
    if total == 0:
        raise MetricError("CER is undefined for empty references")
    return sum(edit_distance(r, h) for r, h in zip(references, hypotheses)) / total
