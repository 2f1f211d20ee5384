"""Deterministic from-scratch classifiers over small dense matrices.

Four model families: Gaussian naive Bayes, k-nearest neighbours,
random forest, and a one-vs-rest SVM trained by sequential minimal
optimization. Labels are small non-negative integers; every model is
deterministic given its seed, and every tie breaks toward the smaller
class index.
"""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np


def _check_training(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError("X must be (n, d) with one label per row")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature values")
    if np.unique(y).size < 2:
        raise ValueError("single-class training set")
    return X, y


def _check_predict(X: np.ndarray, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != d:
        raise ValueError(f"expected {d} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature values")
    return X


class GaussianNB:
    """Per-class Gaussian likelihoods with shared variance smoothing."""

    def __init__(self, var_smoothing: float = 1e-9):
        if var_smoothing < 0:
            raise ValueError("variance smoothing must be >= 0")
        self.var_smoothing = var_smoothing

    def fit(self, X, y) -> "GaussianNB":
        X, y = _check_training(X, y)
        self.classes_ = np.unique(y)
        n, d = X.shape
        eps = self.var_smoothing * float(X.var(axis=0).max())
        self.theta_ = np.empty((self.classes_.size, d))
        self.var_ = np.empty((self.classes_.size, d))
        self.log_prior_ = np.empty(self.classes_.size)
        for idx, c in enumerate(self.classes_):
            rows = X[y == c]
            self.theta_[idx] = rows.mean(axis=0)
            self.var_[idx] = np.maximum(rows.var(axis=0) + eps, 1e-300)
            self.log_prior_[idx] = math.log(rows.shape[0] / n)
        return self

    def predict(self, X) -> np.ndarray:
        X = _check_predict(X, self.theta_.shape[1])
        scores = np.empty((X.shape[0], self.classes_.size))
        for idx in range(self.classes_.size):
            ll = -0.5 * (
                np.log(2.0 * np.pi * self.var_[idx])
                + (X - self.theta_[idx]) ** 2 / self.var_[idx]
            ).sum(axis=1)
            scores[:, idx] = self.log_prior_[idx] + ll
        return self.classes_[np.argmax(scores, axis=1)]


class KNearest:
    """k-nearest neighbours with Euclidean distance and stable ties."""

    def __init__(self, k: int = 5, metric: str = "euclidean"):
        if k < 1:
            raise ValueError("k must be >= 1")
        if metric != "euclidean":
            raise ValueError(f"unsupported metric {metric!r}")
        self.k = k
        self.metric = metric

    def fit(self, X, y) -> "KNearest":
        self.X_, self.y_ = _check_training(X, y)
        if self.k > self.X_.shape[0]:
            raise ValueError("k exceeds the number of training points")
        return self

    def predict(self, X) -> np.ndarray:
        X = _check_predict(X, self.X_.shape[1])
        out = np.empty(X.shape[0], dtype=np.intp)
        n_classes = int(self.y_.max()) + 1
        for i, x in enumerate(X):
            d2 = ((self.X_ - x) ** 2).sum(axis=1)
            nearest = np.argsort(d2, kind="stable")[: self.k]
            votes = np.bincount(self.y_[nearest], minlength=n_classes)
            out[i] = int(np.argmax(votes))
        return out


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "counts")

    def __init__(self, counts=None, feature=None, threshold=None, left=None, right=None):
        self.counts = counts
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p * p).sum())


def _best_split(X, y, feature_ids, n_classes):
    """Lowest weighted Gini over midpoint thresholds of the given features."""
    best = None
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        left = np.zeros(n_classes)
        right = np.bincount(ys, minlength=n_classes).astype(np.float64)
        n = ys.size
        for i in range(n - 1):
            left[ys[i]] += 1
            right[ys[i]] -= 1
            if xs[i] == xs[i + 1]:
                continue
            w = (i + 1) / n
            score = w * _gini(left) + (1 - w) * _gini(right)
            if best is None or score < best[0]:
                best = (score, int(f), (xs[i] + xs[i + 1]) / 2.0)
    return best


class _Tree:
    def __init__(self, max_depth, min_leaf, max_features, n_classes, rng):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.n_classes = n_classes
        self.rng = rng

    def build(self, X, y, depth=0) -> _TreeNode:
        counts = np.bincount(y, minlength=self.n_classes).astype(np.float64)
        if (
            (self.max_depth is not None and depth >= self.max_depth)
            or np.count_nonzero(counts) <= 1
            or y.size < 2 * self.min_leaf
        ):
            return _TreeNode(counts=counts)
        d = X.shape[1]
        m = min(self.max_features, d)
        feature_ids = np.sort(self.rng.choice(d, size=m, replace=False))
        split = _best_split(X, y, feature_ids, self.n_classes)
        if split is None:
            return _TreeNode(counts=counts)
        _, f, thr = split
        mask = X[:, f] <= thr
        if mask.sum() < self.min_leaf or (~mask).sum() < self.min_leaf:
            return _TreeNode(counts=counts)
        node = _TreeNode(feature=f, threshold=thr)
        node.left = self.build(X[mask], y[mask], depth + 1)
        node.right = self.build(X[~mask], y[~mask], depth + 1)
        return node

    @staticmethod
    def leaf_counts(node: _TreeNode, x: np.ndarray) -> np.ndarray:
        while node.counts is None:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.counts


class RandomForest:
    """Bootstrap-aggregated axis-aligned trees with Gini splits."""

    def __init__(
        self,
        trees: int = 100,
        max_depth: int | None = None,
        max_features: Union[int, str] = "sqrt",
        min_leaf: int = 1,
        seed: int = 0,
    ):
        if trees < 1:
            raise ValueError("need at least one tree")
        if max_depth is not None and max_depth < 1:
            raise ValueError("max depth must be >= 1 or None")
        self.trees = trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, X, y) -> "RandomForest":
        X, y = _check_training(X, y)
        self.n_classes_ = int(y.max()) + 1
        d = X.shape[1]
        if self.max_features == "sqrt":
            m = max(1, int(round(math.sqrt(d))))
        elif self.max_features == "all":
            m = d
        else:
            m = int(self.max_features)
            if not 1 <= m <= d:
                raise ValueError("features-per-split out of range")
        rng = np.random.default_rng(self.seed)
        self.roots_ = []
        self.d_ = d
        n = X.shape[0]
        for _ in range(self.trees):
            idx = rng.integers(0, n, size=n)
            tree = _Tree(self.max_depth, self.min_leaf, m, self.n_classes_, rng)
            self.roots_.append(tree.build(X[idx], y[idx]))
        return self

    def predict(self, X) -> np.ndarray:
        X = _check_predict(X, self.d_)
        out = np.empty(X.shape[0], dtype=np.intp)
        for i, x in enumerate(X):
            votes = np.zeros(self.n_classes_)
            for root in self.roots_:
                counts = _Tree.leaf_counts(root, x)
                votes[int(np.argmax(counts))] += 1
            out[i] = int(np.argmax(votes))
        return out


def _kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        d2 = ((A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T)
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise ValueError(f"unsupported kernel {kernel!r}")


def _smo_binary(K, y, C, tol, max_passes, max_sweeps, rng):
    """Simplified sequential minimal optimization for one binary machine.

    y is +/-1. Returns (alpha, b). The random partner choice is the
    only stochastic step, so results are fixed by the caller's rng.
    """
    n = y.size
    alpha = np.zeros(n)
    b = 0.0
    passes = 0
    sweeps = 0
    while passes < max_passes and sweeps < max_sweeps:
        changed = 0
        coef = alpha * y
        for i in range(n):
            e_i = float(coef @ K[:, i]) + b - y[i]
            if not (
                (y[i] * e_i < -tol and alpha[i] < C)
                or (y[i] * e_i > tol and alpha[i] > 0)
            ):
                continue
            j = int(rng.integers(n - 1))
            if j >= i:
                j += 1
            e_j = float(coef @ K[:, j]) + b - y[j]
            a_i, a_j = alpha[i], alpha[j]
            if y[i] != y[j]:
                lo, hi = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
            else:
                lo, hi = max(0.0, a_i + a_j - C), min(C, a_i + a_j)
            if lo == hi:
                continue
            eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
            if eta >= 0:
                continue
            new_j = np.clip(a_j - y[j] * (e_i - e_j) / eta, lo, hi)
            if abs(new_j - a_j) < 1e-7:
                continue
            new_i = a_i + y[i] * y[j] * (a_j - new_j)
            alpha[i], alpha[j] = new_i, new_j
            coef[i], coef[j] = new_i * y[i], new_j * y[j]
            b1 = b - e_i - y[i] * (new_i - a_i) * K[i, i] - y[j] * (new_j - a_j) * K[i, j]
            b2 = b - e_j - y[i] * (new_i - a_i) * K[i, j] - y[j] * (new_j - a_j) * K[j, j]
            if 0 < new_i < C:
                b = b1
            elif 0 < new_j < C:
                b = b2
            else:
                b = (b1 + b2) / 2.0
            changed += 1
        passes = passes + 1 if changed == 0 else 0
        sweeps += 1
    return alpha, b


class SupportVectorMachine:
    """One-vs-rest SVM trained by SMO; argmax of margin scores."""

    def __init__(
        self,
        C: float = 1.0,
        kernel: str = "linear",
        gamma: Union[float, str] = "scale",
        tol: float = 1e-3,
        max_passes: int = 5,
        max_sweeps: int = 200,
        seed: int = 0,
    ):
        if C <= 0:
            raise ValueError("C must be positive")
        if kernel not in ("linear", "rbf"):
            raise ValueError(f"unsupported kernel {kernel!r}")
        if not (gamma == "scale" or (isinstance(gamma, (int, float)) and gamma > 0)):
            raise ValueError("gamma must be positive or 'scale'")
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.max_sweeps = max_sweeps
        self.seed = seed

    def _gamma_value(self, X: np.ndarray) -> float:
        if self.gamma == "scale":
            var = float(X.var())
            return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        return float(self.gamma)

    def fit(self, X, y) -> "SupportVectorMachine":
        X, y = _check_training(X, y)
        self.X_ = X
        self.classes_ = np.unique(y)
        self.gamma_ = self._gamma_value(X)
        K = _kernel_matrix(X, X, self.kernel, self.gamma_)
        rng = np.random.default_rng(self.seed)
        self.machines_ = []
        for c in self.classes_:
            y_bin = np.where(y == c, 1.0, -1.0)
            alpha, b = _smo_binary(
                K, y_bin, self.C, self.tol, self.max_passes, self.max_sweeps, rng
            )
            self.machines_.append((alpha * y_bin, b))
        return self

    def decision_values(self, X) -> np.ndarray:
        X = _check_predict(X, self.X_.shape[1])
        K = _kernel_matrix(X, self.X_, self.kernel, self.gamma_)
        scores = np.empty((X.shape[0], len(self.machines_)))
        for idx, (coef, b) in enumerate(self.machines_):
            scores[:, idx] = K @ coef + b
        return scores

    def predict(self, X) -> np.ndarray:
        scores = self.decision_values(X)
        return self.classes_[np.argmax(scores, axis=1)]
