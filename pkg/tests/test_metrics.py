import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import macro_ovr_auroc, pairwise_auroc

from graphtax.errors import EvaluationError, InputError
from graphtax.metrics import auroc, binary_auroc
from graphtax.splits import stratified_holdout, stratified_kfold


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 1.0
    assert auroc([0.9, 0.2, 0.6, 0.4], [1, 0, 0, 1]) == 0.75
    assert auroc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auroc_needs_both_classes():
    with pytest.raises(EvaluationError):
        binary_auroc([0.1, 0.2], [True, True])


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31 - 1))
def test_binary_matches_pairwise(n, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    scores = rng.integers(0, 5, n) / 4.0  # coarse grid forces ties
    assert abs(auroc(scores, labels) - pairwise_auroc(scores, labels)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 40), st.integers(3, 5), st.integers(0, 2**31 - 1))
def test_macro_matches_pairwise(n, c, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, c, n)
    labels[:2] = [0, 1]
    scores = rng.random((n, c)).round(1)
    assert abs(auroc(scores, labels) - macro_ovr_auroc(scores, labels)) < 1e-12


def test_kfold_examples():
    folds = stratified_kfold([0] * 5 + [1] * 5, 5, seed=0)
    labels = np.array([0] * 5 + [1] * 5)
    assert all(sorted(labels[f].tolist()) == [0, 1] for f in folds)

    labels = np.array([0, 0, 0, 1])
    for seed in range(20):
        folds = stratified_kfold(labels, 2, seed)
        assert all(np.sum(labels[f] == 0) in (1, 2) and np.sum(labels[f] == 1) in (0, 1) for f in folds)

    a, b = stratified_kfold(labels, 2, 3), stratified_kfold(labels, 2, 3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_kfold_rejects_bad_k():
    for k in (1, 5):
        with pytest.raises(InputError):
            stratified_kfold([0, 1, 0, 1], k, 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=10, max_size=80), st.integers(2, 10), st.integers(0, 1000))
def test_kfold_partition_and_balance(labels, k, seed):
    labels = np.array(labels)
    folds = stratified_kfold(labels, k, seed)
    joined = np.sort(np.concatenate(folds))
    assert np.array_equal(joined, np.arange(len(labels)))
    for c in np.unique(labels):
        counts = [int(np.sum(labels[f] == c)) for f in folds]
        assert max(counts) - min(counts) <= 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_holdout_is_disjoint_and_stratified():
    labels = np.array([0] * 40 + [1] * 20)
    keep, hold = stratified_holdout(labels, 0.1, seed=4)
    assert len(set(keep) & set(hold)) == 0 and len(keep) + len(hold) == 60
    assert np.sum(labels[hold] == 0) == 4 and np.sum(labels[hold] == 1) == 2
