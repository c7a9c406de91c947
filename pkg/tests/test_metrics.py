import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtlctc import metrics
from mtlctc.metrics import MetricError, cer, edit_distance, pooled_cer

text = st.text(alphabet="abcd", max_size=12)


def test_cer_examples():
    assert cer("abc", "abc") == 0
    assert cer("abc", "axc") == pytest.approx(1 / 3)
    assert cer("ab", "") == 1.0
    with pytest.raises(MetricError):
        cer("", "a")


def test_pooled_not_mean():
    assert pooled_cer(["abc", "de"], ["abc", "dx"]) == pytest.approx(1 / 5)
    assert pooled_cer(["abc", "de"], ["abc", "de"]) == 0
    assert pooled_cer(["abc", "de"], ["", ""]) == 1.0
    # per-utterance mean would be (0 + 1/2)/2 = 0.25
    assert pooled_cer(["abcd", "ab"], ["abcd", "ax"]) == pytest.approx(1 / 6)


def test_label_sequences_accepted():
    assert edit_distance((1, 2, 3), (1, 3)) == 1


@settings(max_examples=200, deadline=None)
@given(text, text)
def test_edit_distance_properties(a, b):
    d = edit_distance(a, b)
    assert d == edit_distance(b, a)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))
    assert edit_distance(a, a) == 0


@settings(max_examples=200, deadline=None)
@given(text, text)
def test_kernels_agree(a, b):
    x = np.array([ord(c) for c in a], dtype=np.int64)
    y = np.array([ord(c) for c in b], dtype=np.int64)
    assert int(metrics._edit_distance_loops(x, y)) == metrics._edit_distance_numpy(x, y)


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="abc", min_size=1, max_size=10), st.data())
def test_substitution_symmetry(a, data):
    b = data.draw(st.text(alphabet="abc", min_size=len(a), max_size=len(a)))
    assert cer(a, b) * len(a) == cer(b, a) * len(b)
