"""Evaluation metrics reported by the benchmark tools.

Note the asymmetry with the squared training loss: fitting minimizes
0.5*(y-g)^2 but reported MSE is the plain mean squared error.
"""
from __future__ import annotations

import numpy as np

from .errors import DataError
from .losses import LossSpec, mean_loss


def mse(y, scores):
    y = np.asarray(y, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if y.size == 0:
        raise DataError("mse of an empty vector")
    return float(np.mean((y - scores) ** 2))


def binary_logloss(y, scores):
    """Mean negative log-likelihood of 0/1 labels under log-odds scores."""
    return mean_loss(LossSpec("logloss"), y, scores)


def auc(y, scores):
    """Rank-based AUC with midranks for tied scores."""
    y = np.asarray(y, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("auc needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(y.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < y.size:
        j = i
        while j + 1 < y.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
