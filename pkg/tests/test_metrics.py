import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slavgae.errors import InvalidQueryError
from slavgae.metrics import accuracy, confusion_matrix, mcc, score


def binary_mcc(tp, tn, fp, fn):
    den = np.sqrt(float((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)))
    return 0.0 if den == 0 else (tp * tn - fp * fn) / den


def as_conf(tp, tn, fp, fn):
    # rows are true classes, class 1 is "positive"
    return np.array([[tn, fp], [fn, tp]])


def test_accuracy_examples():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1
    assert accuracy([0, 1], [1, 0]) == 0
    assert accuracy([0, 1, 1, 0], [0, 1, 0, 0]) == 0.75
    with pytest.raises(InvalidQueryError):
        accuracy([], [])


def test_confusion_matrix_layout():
    conf = confusion_matrix([0, 0, 1, 2], [0, 1, 1, 1], num_classes=3)
    assert conf.tolist() == [[1, 1, 0], [0, 1, 0], [0, 1, 0]]


def test_mcc_examples():
    assert mcc(np.diag([3, 4, 5])) == 1
    assert mcc(np.array([[5, 0], [5, 0]])) == 0
    assert mcc(as_conf(4, 3, 1, 2)) == pytest.approx(10 / np.sqrt(5 * 6 * 4 * 5), abs=1e-15)
    assert mcc(np.array([[0, 3], [4, 0]])) == -1
    with pytest.raises(InvalidQueryError):
        mcc(np.zeros((2, 2)))


def test_mcc_matches_binary_formula_exhaustively():
    for tp, tn, fp, fn in itertools.product(range(21), repeat=4):
        if tp + tn + fp + fn == 0:
            continue
        assert abs(mcc(as_conf(tp, tn, fp, fn)) - binary_mcc(tp, tn, fp, fn)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_mcc_permutation_invariant_and_bounded(c, seed):
    rng = np.random.default_rng(seed)
    conf = rng.integers(0, 10, size=(c, c))
    conf[0, 0] += 1
    perm = rng.permutation(c)
    v = mcc(conf)
    assert -1 - 1e-12 <= v <= 1 + 1e-12
    assert mcc(conf[np.ix_(perm, perm)]) == pytest.approx(v, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_perfect_prediction_and_trace_identity(c, n, seed):
    rng = np.random.default_rng(seed)
    true = rng.integers(0, c, size=n)
    pred = rng.integers(0, c, size=n)
    rep = score(true, true, c)
    assert rep.accuracy == 1.0
    assert rep.mcc == (1.0 if np.unique(true).size > 1 else 0.0)
    conf = confusion_matrix(true, pred, c)
    assert conf.sum() == n
    assert accuracy(true, pred) == np.trace(conf) / n
