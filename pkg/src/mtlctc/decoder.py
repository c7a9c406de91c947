"""Turning CTC output matrices into label sequences.

All decoders return tuples of symbol indices; render them with
``Alphabet.decode``.  Ties are resolved toward the lexicographically
smallest labeling (equivalently, the lowest symbol index per frame).
"""
from __future__ import annotations

import heapq
import itertools
import math
from collections import defaultdict

import numpy as np

# two log-probabilities closer than this count as a tie
TIE_TOL = 1e-12


class DecodeError(ValueError):
    pass


def collapse_alignment(path, blank: int = 0) -> tuple:
    """Merge consecutive repeats, then drop blanks."""
    out = []
    prev = None
    for k in path:
        k = int(k)
        if k != prev and k != blank:
            out.append(k)
        prev = k
    return tuple(out)


def best_path_decode(O, blank: int = 0) -> tuple:
    O = np.asarray(O)
    if O.shape[0] == 0:
        return ()
    return collapse_alignment(np.argmax(O, axis=1), blank)


def _lse(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def _pick(scored):
    """Highest log-probability; near-ties go to the smallest labeling."""
    best_score = max(s for _, s in scored)
    tied = [p for p, s in scored if best_score - s <= TIE_TOL]
    winner = min(tied)
    return winner, dict(scored)[winner]


def beam_search_scored(O, beam_width: int = 100, blank: int = 0):
    """Prefix beam search; returns ``(labeling, log_probability)``.

    Each surviving prefix tracks the mass of alignments ending in blank and
    in a non-blank symbol separately, so probabilities are summed across
    alignments of the same labeling rather than maximised.
    """
    if beam_width < 1:
        raise DecodeError(f"beam_width must be >= 1, got {beam_width}")
    O = np.asarray(O, dtype=np.float64)
    T, S = O.shape
    ninf = -math.inf
    beams = {(): [0.0, ninf]}
    symbols = [k for k in range(S) if k != blank]
    for row in O.tolist():
        lp_blank = row[blank]
        nxt = {}
        for prefix, (pb, pnb) in beams.items():
            total = _lse(pb, pnb)
            cell = nxt.get(prefix)
            if cell is None:
                cell = nxt[prefix] = [ninf, ninf]
            cell[0] = _lse(cell[0], total + lp_blank)
            last = prefix[-1] if prefix else -1
            for k in symbols:
                lpk = row[k]
                if lpk == ninf:
                    continue
                key = prefix + (k,)
                ext = nxt.get(key)
                if ext is None:
                    ext = nxt[key] = [ninf, ninf]
                if k == last:
                    ext[1] = _lse(ext[1], pb + lpk)
                    cell[1] = _lse(cell[1], pnb + lpk)
                else:
                    ext[1] = _lse(ext[1], total + lpk)
        if len(nxt) > beam_width:
            keep = heapq.nsmallest(beam_width, nxt.items(), key=lambda kv: (-_lse(*kv[1]), kv[0]))
            beams = dict(keep)
        else:
            beams = nxt
    return _pick([(p, _lse(pb, pnb)) for p, (pb, pnb) in beams.items()])


def beam_search_decode(O, beam_width: int = 100, blank: int = 0) -> tuple:
    return beam_search_scored(O, beam_width, blank)[0]


def labeling_log_probabilities(O, blank: int = 0, budget: int = 10**6) -> dict:
    """Exact log-probability of every reachable labeling, by enumeration."""
    O = np.asarray(O, dtype=np.float64)
    T, S = O.shape
    if S ** T > budget:
        raise DecodeError(f"|S|^T = {S}^{T} exceeds the enumeration budget {budget}")
    P = np.exp(O)
    mass = defaultdict(list)
    for a in itertools.product(range(S), repeat=T):
        mass[collapse_alignment(a, blank)].append(math.prod(P[t, k] for t, k in enumerate(a)))
    out = {}
    for lab, terms in mass.items():
        total = math.fsum(terms)
        out[lab] = math.log(total) if total > 0 else -math.inf
    return out


def exhaustive_decode(O, blank: int = 0, budget: int = 10**6) -> tuple:
    """Oracle decoder: the most probable labeling over all alignments."""
    return _pick(list(labeling_log_probabilities(O, blank, budget).items()))[0]
