"""Area under the ROC curve in its Mann-Whitney form."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import EvaluationError, InputError


def binary_auroc(scores, positive) -> float:
    """P(score of a random positive > score of a random negative), ties count 1/2."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    positive = np.asarray(positive, dtype=bool).ravel()
    if scores.shape != positive.shape:
        raise InputError("scores and labels differ in length")
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("need at least one positive and one negative example")
    ranks = rankdata(scores, method="average")
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auroc(scores, labels) -> float:
    """AUROC for 1-D binary scores, or macro one-vs-rest for an ``(n, C)`` score matrix.

    In the multiclass case classes lacking positives or negatives are skipped.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if scores.ndim == 1:
        if not np.isin(labels, (0, 1)).all():
            raise InputError("binary AUROC expects labels in {0, 1}")
        return binary_auroc(scores, labels == 1)
    if scores.ndim != 2 or scores.shape[0] != len(labels):
        raise InputError(f"score matrix {scores.shape} does not match {len(labels)} labels")
    if len(labels) and (labels.min() < 0 or labels.max() >= scores.shape[1]):
        raise InputError("label outside the score columns")
    values = []
    for c in range(scores.shape[1]):
        pos = labels == c
        if pos.any() and not pos.all():
            values.append(binary_auroc(scores[:, c], pos))
    if not values:
        raise EvaluationError("no class has both positive and negative examples")
    return float(np.mean(values))
