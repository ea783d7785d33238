"""Threshold-agnostic ranking metrics for scored anomaly lists.

All three metrics depend only on the ranking induced by the scores. Ties
are handled explicitly: ROC AUC gives half credit to tied positive/negative
pairs (the rank-statistic convention), while the precision-based metrics
order tied scores by ascending index.
"""

from __future__ import annotations

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when a metric is undefined for the given label mix."""


def _as_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and equally long")
    return scores, labels


def _descending_order(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score; ties broken by ascending index."""
    return np.lexsort((np.arange(scores.size), -scores))


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative,
    with ties counted half."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC AUC needs at least one positive and one negative")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0  # average of 1-based ranks
        i = j + 1
    pos_rank_sum = float(ranks[labels].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(scores, labels) -> float:
    """Average precision: mean over positives of the precision at each
    positive's rank in descending-score order."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive")
    ranked = labels[_descending_order(scores)]
    tp = 0
    total = 0.0
    for rank, is_pos in enumerate(ranked, 1):
        if is_pos:
            tp += 1
            total += tp / rank
    return total / n_pos


def precision_at_n(scores, labels, n: int) -> float:
    """Fraction of the n highest-scored objects that are labelled positive."""
    scores, labels = _as_arrays(scores, labels)
    if not 1 <= n <= scores.size:
        raise ValueError(f"n={n} must be in [1, {scores.size}]")
    top = _descending_order(scores)[:n]
    return float(labels[top].sum()) / n
