"""Quantile regression forest built from scratch.

Regression trees are grown CART-style on bootstrap samples (drawn with
replacement, same size as the training set), splitting to minimise the
children's summed squared error over a per-split random feature subset.
Unlike a plain random forest, the trees keep their observations: every
training row is routed down every fitted tree, and a query row collects
uniform weights over the rows sharing its leaf, averaged across trees.
The weighted empirical distribution of the responses then gives the
conditional CDF and any conditional quantile.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _treekernels as _tk
from ._rng import MASK

__all__ = ["ForestParams", "Tree", "QuantileForest", "fit_tree", "fit_forest"]


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters.

    ``max_split_features=None`` considers every predictor at each split,
    which is the default used throughout the scoring pipeline.
    """

    n_trees: int = 10
    max_split_features: int | None = None
    min_samples_split: int = 10

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_split_features is not None and self.max_split_features < 1:
            raise ValueError("max_split_features must be >= 1")
        if self.min_samples_split < 1:
            raise ValueError("min_samples_split must be >= 1")


@dataclass(frozen=True)
class Tree:
    """Flat-array view of one fitted tree.

    ``feature[node] < 0`` marks a leaf. ``leaf_samples`` returns the
    bootstrap copies that grew the leaf (training-row indices, with
    multiplicity); ``leaf_members`` returns every training row routed
    into the leaf's region, which is what query weights are based on.
    Internal nodes route a query left iff ``u[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_lo: np.ndarray
    leaf_hi: np.ndarray
    samples: np.ndarray
    routed: np.ndarray
    routed_lo: np.ndarray
    routed_hi: np.ndarray
    n_nodes: int

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def leaf_samples(self, node: int) -> np.ndarray:
        if not self.is_leaf(node):
            raise ValueError(f"node {node} is internal")
        return self.samples[self.leaf_lo[node]:self.leaf_hi[node]]

    def leaf_members(self, node: int) -> np.ndarray:
        if not self.is_leaf(node):
            raise ValueError(f"node {node} is internal")
        return self.routed[self.routed_lo[node]:self.routed_hi[node]]

    def route(self, u: np.ndarray) -> int:
        """Leaf node id reached by query row u."""
        node = 0
        while self.feature[node] >= 0:
            if u[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(node)


class QuantileForest:
    """Fitted forest answering conditional CDF and quantile queries."""

    def __init__(
        self,
        train_x: np.ndarray,
        train_y: np.ndarray,
        params: ForestParams,
        seed: int,
        arrays: tuple[np.ndarray, ...],
        node_count: np.ndarray,
    ) -> None:
        self.train_x = train_x
        self.train_y = train_y
        self.params = params
        self.seed = seed
        (self._feature, self._threshold, self._left, self._right,
         self._leaf_lo, self._leaf_hi, self._samples,
         self._routed, self._routed_lo, self._routed_hi) = arrays
        self._node_count = node_count
        self._y_order = np.argsort(train_y, kind="stable")
        self._y_sorted = train_y[self._y_order]

    @property
    def n_train(self) -> int:
        return self.train_y.shape[0]

    @property
    def n_trees(self) -> int:
        return self.params.n_trees

    @property
    def trees(self) -> tuple[Tree, ...]:
        return tuple(
            Tree(
                feature=self._feature[t],
                threshold=self._threshold[t],
                left=self._left[t],
                right=self._right[t],
                leaf_lo=self._leaf_lo[t],
                leaf_hi=self._leaf_hi[t],
                samples=self._samples[t],
                routed=self._routed[t],
                routed_lo=self._routed_lo[t],
                routed_hi=self._routed_hi[t],
                n_nodes=int(self._node_count[t]),
            )
            for t in range(self.n_trees)
        )

    def _check_query(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.train_x.shape[1],):
            raise ValueError(
                f"query row has shape {u.shape}, expected ({self.train_x.shape[1]},)"
            )
        return u

    def leaf_weights(self, u: np.ndarray) -> np.ndarray:
        """Per-training-row weights for query u; non-negative, summing to 1."""
        u = self._check_query(u)
        out = np.empty(self.n_train)
        _tk.forest_weights_kernel(
            self._feature, self._threshold, self._left, self._right,
            self._routed, self._routed_lo, self._routed_hi, u, out,
        )
        return out

    def conditional_cdf(self, u: np.ndarray, v: float) -> float:
        """Estimated P(response <= v) given predictors u."""
        w_sorted = self.leaf_weights(u)[self._y_order]
        pos = int(np.searchsorted(self._y_sorted, v, side="right"))
        if pos == 0:
            return 0.0
        return float(np.cumsum(w_sorted)[pos - 1])

    def conditional_quantiles(self, u: np.ndarray, alphas: Sequence[float]) -> np.ndarray:
        """Conditional quantiles at the given ascending levels in [0, 1].

        Level 0 returns the smallest positively weighted response (the
        literal infimum would be unbounded below).
        """
        alphas = np.asarray(alphas, dtype=np.float64)
        if alphas.ndim != 1 or alphas.size == 0:
            raise ValueError("alphas must be a non-empty 1-D sequence")
        if np.any(np.diff(alphas) < 0):
            raise ValueError("alphas must be sorted ascending")
        if alphas[0] < 0.0 or alphas[-1] > 1.0:
            raise ValueError("alphas must lie in [0, 1]")
        w_sorted = self.leaf_weights(u)[self._y_order]
        out = np.empty(alphas.size)
        _tk.weighted_quantiles_kernel(self._y_sorted, w_sorted, alphas, out)
        return out


def _as_training(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be 2-D (rows, features)")
    if y.shape != (x.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({x.shape[0]},)")
    if x.shape[0] < 1:
        raise ValueError("need at least one training row")
    return x, y


def fit_forest(x: np.ndarray, y: np.ndarray, params: ForestParams, seed: int) -> QuantileForest:
    """Fit a forest; tree t's random stream is keyed by mix_seed(seed, t),
    so results are bit-reproducible for a fixed seed."""
    x, y = _as_training(x, y)
    n, p = x.shape
    n_f = params.max_split_features if params.max_split_features is not None else p
    max_nodes = _tk.max_nodes_for(n)
    shape = (params.n_trees, max_nodes)
    feature = np.empty(shape, np.int64)
    threshold = np.empty(shape, np.float64)
    left = np.empty(shape, np.int64)
    right = np.empty(shape, np.int64)
    leaf_lo = np.empty(shape, np.int64)
    leaf_hi = np.empty(shape, np.int64)
    samples = np.empty((params.n_trees, n), np.int64)
    routed = np.empty((params.n_trees, n), np.int64)
    routed_lo = np.empty(shape, np.int64)
    routed_hi = np.empty(shape, np.int64)
    node_count = np.empty(params.n_trees, np.int64)
    _tk.fit_forest_kernel(
        x, y, params.n_trees, n_f, params.min_samples_split,
        np.uint64(seed & MASK), feature, threshold, left, right,
        leaf_lo, leaf_hi, samples, routed, routed_lo, routed_hi, node_count,
    )
    arrays = (feature, threshold, left, right, leaf_lo, leaf_hi, samples,
              routed, routed_lo, routed_hi)
    return QuantileForest(x, y, params, seed, arrays, node_count)


def fit_tree(x: np.ndarray, y: np.ndarray, params: ForestParams, seed: int) -> Tree:
    """Fit a single tree (the first tree of a one-tree forest for ``seed``)."""
    forest = fit_forest(x, y, replace(params, n_trees=1), seed)
    return next(iter(forest.trees))
