"""Deterministic stratified splitting."""

from __future__ import annotations

import numpy as np

from .errors import InputError


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """Partition ``range(len(labels))`` into ``k`` class-balanced folds.

    Members of each class are shuffled and dealt round-robin, continuing the
    deal across classes, so per-class counts and fold sizes differ by <= 1.
    """
    labels = np.asarray(labels).ravel()
    if k < 2:
        raise InputError("k must be at least 2")
    if k > len(labels):
        raise InputError(f"cannot make {k} folds from {len(labels)} samples")
    rng = np.random.default_rng(seed)
    owner = np.empty(len(labels), dtype=np.int64)
    pos = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        owner[members] = (pos + np.arange(len(members))) % k
        pos += len(members)
    return [np.flatnonzero(owner == f) for f in range(k)]


def stratified_holdout(labels, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split into (keep, holdout) with roughly ``fraction`` held out per class."""
    labels = np.asarray(labels).ravel()
    if len(labels) < 2:
        raise InputError("need at least two samples to hold some out")
    k = min(len(labels), max(2, int(round(1.0 / fraction))))
    folds = stratified_kfold(labels, k, seed)
    keep = np.sort(np.concatenate(folds[1:]))
    return keep, folds[0]
