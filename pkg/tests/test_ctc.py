import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_log_matrix
from mtlctc import ctc
from mtlctc.ctc import (CTCError, InfeasibleTargetError, alignment_probability, ctc_loss, ctc_loss_bruteforce,
                        ctc_loss_packed, expand_with_blanks, log_softmax, min_frames, softmax_frame)
from mtlctc.decoder import collapse_alignment
from mtlctc.nn.gradcheck import numeric_gradient, relative_error


def test_softmax_examples():
    np.testing.assert_allclose(softmax_frame(np.zeros(29)), np.full(29, 1 / 29), rtol=1e-14)
    np.testing.assert_allclose(softmax_frame([0.0, math.log(2)]), [1 / 3, 2 / 3], rtol=1e-14)
    z = np.random.default_rng(0).normal(size=7)
    np.testing.assert_allclose(softmax_frame(z + 123.4), softmax_frame(z), rtol=1e-12)
    assert abs(softmax_frame(z * 50).sum() - 1) < 1e-12


def test_expand_with_blanks():
    assert expand_with_blanks([1, 2]).tolist() == [0, 1, 0, 2, 0]
    assert expand_with_blanks([]).tolist() == [0]
    assert expand_with_blanks([1, 1]).tolist() == [0, 1, 0, 1, 0]


def test_single_frame_loss():
    O = np.log([[0.5, 0.5]])
    loss, _ = ctc_loss(O, [1])
    assert loss == pytest.approx(-math.log(0.5), abs=1e-15)


def test_two_frames_uniform():
    O = np.log(np.full((2, 2), 0.5))
    loss, _ = ctc_loss(O, [1])
    assert loss == pytest.approx(-math.log(0.75), abs=1e-15)


def test_repeat_needs_blank():
    O = np.log(np.full((2, 2), 0.5))
    with pytest.raises(InfeasibleTargetError, match="target too long for T"):
        ctc_loss(O, [1, 1])
    assert min_frames([1, 1]) == 3
    assert min_frames([1, 2, 2, 2]) == 6


def test_unnormalised_rejected():
    with pytest.raises(CTCError):
        ctc_loss(np.log(np.full((2, 3), 0.5)), [1])
    with pytest.raises(CTCError):
        ctc_loss(np.log(np.full((2, 2), 0.5)), [0])


def test_empty_target_single_frame():
    O = np.log([[0.3, 0.7]])
    assert ctc_loss_bruteforce(O, []) == pytest.approx(-math.log(0.3), abs=1e-15)
    assert ctc_loss(O, [])[0] == pytest.approx(-math.log(0.3), abs=1e-15)


def test_bruteforce_budget():
    with pytest.raises(CTCError):
        ctc_loss_bruteforce(random_log_matrix(np.random.default_rng(0), 12, 4), [1], budget=1000)


def test_alignment_probability():
    O = np.log(np.full((2, 3), 1 / 3))
    assert alignment_probability(O, [0, 2]) == pytest.approx(1 / 9)
    O1 = np.log([[0.2, 0.8]])
    assert alignment_probability(O1, [1]) == pytest.approx(0.8)
    with pytest.raises(CTCError):
        alignment_probability(O, [0])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(2, 4), st.integers(0, 3), st.integers(0, 2**31))
def test_matches_bruteforce(T, S, L, seed):
    rng = np.random.default_rng(seed)
    target = rng.integers(1, S, size=L)
    if min_frames(target) > T:
        return
    O = random_log_matrix(rng, T, S, scale=2.0)
    assert abs(ctc_loss(O, target)[0] - ctc_loss_bruteforce(O, target)) <= 1e-9


def test_labelings_partition_probability():
    rng = np.random.default_rng(3)
    T, S = 4, 3
    O = random_log_matrix(rng, T, S)
    total = 0.0
    for L in range(T + 1):
        for target in itertools.product(range(1, S), repeat=L):
            if min_frames(target) <= T:
                total += math.exp(-ctc_loss(O, target)[0])
    assert abs(total - 1.0) < 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    T, S = int(rng.integers(2, 7)), int(rng.integers(2, 5))
    target = rng.integers(1, S, size=int(rng.integers(0, 3)))
    if min_frames(target) > T:
        target = target[:1]
    logits = {"z": rng.normal(size=(T, S))}
    _, analytic = ctc_loss(log_softmax(logits["z"]), target)
    numeric = numeric_gradient(lambda: ctc_loss(log_softmax(logits["z"]), target)[0], logits)["z"]
    assert relative_error(analytic, numeric).max() <= 1e-4


def test_feasibility_monotone_in_T():
    rng = np.random.default_rng(5)
    for _ in range(50):
        S = 3
        target = rng.integers(1, S, size=int(rng.integers(0, 4)))
        T = min_frames(target) if len(target) else 1
        O = random_log_matrix(rng, T, S)
        ctc_loss(O, target)
        O2 = np.vstack([O, random_log_matrix(rng, 1, S)])
        assert math.isfinite(ctc_loss(O2, target)[0])


def test_packed_equals_individual():
    rng = np.random.default_rng(9)
    mats = [random_log_matrix(rng, T, 4) for T in (3, 5, 6)]
    targets = [np.array([1]), np.array([2, 3]), np.array([1, 1, 2])]
    offsets = np.array([0, 3, 8, 14])
    losses, grad = ctc_loss_packed(np.vstack(mats), offsets, targets)
    for i, (O, t) in enumerate(zip(mats, targets)):
        l, g = ctc_loss(O, t)
        assert losses[i] == pytest.approx(l, abs=1e-12)
        np.testing.assert_allclose(grad[offsets[i]:offsets[i + 1]], g, atol=1e-12)


def test_numba_and_numpy_kernels_agree():
    rng = np.random.default_rng(11)
    for _ in range(30):
        T, S = int(rng.integers(1, 20)), int(rng.integers(2, 8))
        target = rng.integers(1, S, size=int(rng.integers(0, 6)))
        if min_frames(target) > T:
            continue
        O = random_log_matrix(rng, T, S, 3.0)
        ext = expand_with_blanks(target)
        grad = np.empty_like(O)
        l1 = ctc._ctc_one_loops(O, ext, 0, grad)
        l2, g2 = ctc._ctc_one_numpy(O, ext, 0)
        assert l1 == pytest.approx(l2, abs=1e-10)
        np.testing.assert_allclose(grad, g2, atol=1e-10)


def test_gradient_rows_sum_to_zero():
    rng = np.random.default_rng(2)
    O = random_log_matrix(rng, 6, 4)
    _, g = ctc_loss(O, [1, 2])
    np.testing.assert_allclose(g.sum(axis=1), 0, atol=1e-12)


def test_collapse_roundtrip_against_bruteforce_definition():
    assert collapse_alignment([0, 1, 1, 0, 2]) == (1, 2)
    assert collapse_alignment([1, 0, 1]) == (1, 1)
    assert collapse_alignment([0, 0, 0]) == ()
