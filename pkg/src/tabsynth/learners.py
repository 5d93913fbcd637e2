"""Baseline learners and metrics for the utility and similarity evaluations.

Implemented in-repo so that evaluation results are deterministic across
platforms: multinomial logistic regression (full-batch gradient descent),
ridge regression (normal equations), and a CART random forest with Gini /
variance-reduction splits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import CLASSIFICATION, REGRESSION


@dataclass
class Dataset2D:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) class indices or reals

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (n, d) with one label per row")
        if len(self.features) < 1:
            raise ValueError("empty dataset")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite feature values")


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 2
    seed: int = 0

    def validate(self):
        if min(self.n_trees, self.max_depth, self.min_samples_leaf) < 1:
            raise ValueError("forest config fields must be positive")


class LogisticModel:
    def __init__(self, weights, bias, mu, sigma, classes):
        self.weights = weights  # (d, k)
        self.bias = bias  # (k,)
        self.mu = mu
        self.sigma = sigma
        self.classes = classes

    def decision(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mu) / self.sigma
        return Z @ self.weights + self.bias

    def predict(self, X):
        return np.argmax(self.decision(X), axis=1)


def fit_logistic(train: Dataset2D, l2: float = 1e-4, iters: int = 500,
                 step_size: float = 0.25) -> LogisticModel:
    """Multinomial logistic regression by full-batch gradient descent on the
    mean cross-entropy plus an L2 penalty on the weights. Features are
    standardized internally; zero initialization keeps the fit deterministic.
    """
    y = train.labels.astype(np.int64)
    classes = int(y.max()) + 1
    if len(np.unique(y)) < 2:
        raise ValueError("training data contains a single class")
    X = train.features
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma[sigma == 0] = 1.0
    Z = (X - mu) / sigma
    n, d = Z.shape

    W = np.zeros((d, classes))
    b = np.zeros(classes)
    onehot = np.zeros((n, classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(iters):
        logits = Z @ W + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        err = (p - onehot) / n
        W -= step_size * (Z.T @ err + 2.0 * l2 * W)
        b -= step_size * err.sum(axis=0)
    return LogisticModel(W, b, mu, sigma, classes)


class LinearModel:
    def __init__(self, coef, intercept):
        self.coef = coef
        self.intercept = intercept

    def predict(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept


def fit_linear(train: Dataset2D, l2: float = 1e-8) -> LinearModel:
    """Ridge regression via the normal equations, intercept unpenalized."""
    X = train.features
    y = train.labels.astype(np.float64)
    n, d = X.shape
    if n < d:
        raise ValueError(f"need at least as many rows ({n}) as features ({d})")
    A = np.hstack([X, np.ones((n, 1))])
    gram = A.T @ A
    reg = np.eye(d + 1) * l2
    reg[d, d] = 0.0
    try:
        theta = np.linalg.solve(gram + reg, A.T @ y)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"degenerate design matrix: {exc}") from exc
    if not np.all(np.isfinite(theta)):
        raise ValueError("degenerate design matrix: non-finite solution")
    return LinearModel(theta[:d], float(theta[d]))


class _Tree:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value=None):
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.value = value  # leaf payload: class index or mean


def _gini_best_split(x_sorted, y_sorted, n_classes, min_leaf):
    """Best threshold on one sorted feature by Gini gain; returns
    (score, threshold) where lower score is better, or None."""
    n = len(y_sorted)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_sorted] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]  # counts left of each boundary
    total = left[-1] + onehot[-1]
    right = total - left
    nl = np.arange(1, n)
    nr = n - nl
    gl = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
    gr = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
    score = (nl * gl + nr * gr) / n
    valid = (x_sorted[1:] > x_sorted[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, np.inf)
    i = int(np.argmin(score))
    return float(score[i]), float((x_sorted[i] + x_sorted[i + 1]) / 2.0)


def _variance_best_split(x_sorted, y_sorted, min_leaf):
    n = len(y_sorted)
    cum = np.cumsum(y_sorted)[:-1]
    cum2 = np.cumsum(y_sorted**2)[:-1]
    total, total2 = cum[-1] + y_sorted[-1], cum2[-1] + y_sorted[-1] ** 2
    nl = np.arange(1, n)
    nr = n - nl
    sse_l = cum2 - cum**2 / nl
    sse_r = (total2 - cum2) - (total - cum) ** 2 / nr
    score = (sse_l + sse_r) / n
    valid = (x_sorted[1:] > x_sorted[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, np.inf)
    i = int(np.argmin(score))
    return float(score[i]), float((x_sorted[i] + x_sorted[i + 1]) / 2.0)


def _leaf_value(y, task, n_classes):
    if task == CLASSIFICATION:
        return int(np.argmax(np.bincount(y, minlength=n_classes)))
    return float(y.mean())


def _grow(X, y, depth, config, task, n_classes, n_feats, rng):
    node = _Tree()
    if (
        depth >= config.max_depth
        or len(y) < 2 * config.min_samples_leaf
        or np.all(y == y[0])
    ):
        node.value = _leaf_value(y, task, n_classes)
        return node

    best = None
    features = rng.choice(X.shape[1], size=n_feats, replace=False)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        found = (
            _gini_best_split(xs, ys, n_classes, config.min_samples_leaf)
            if task == CLASSIFICATION
            else _variance_best_split(xs, ys, config.min_samples_leaf)
        )
        if found and (best is None or found[0] < best[0]):
            best = (found[0], int(f), found[1])
    if best is None:
        node.value = _leaf_value(y, task, n_classes)
        return node

    _, f, threshold = best
    mask = X[:, f] <= threshold
    node.feature, node.threshold = f, threshold
    node.left = _grow(X[mask], y[mask], depth + 1, config, task, n_classes, n_feats, rng)
    node.right = _grow(X[~mask], y[~mask], depth + 1, config, task, n_classes, n_feats, rng)
    return node


class Forest:
    def __init__(self, trees, task, n_classes, config, bootstrap_indices):
        self.trees = trees
        self.task = task
        self.n_classes = n_classes
        self.config = config
        self.bootstrap_indices = bootstrap_indices

    def _tree_predict(self, tree, X):
        out = np.empty(len(X))
        idx = np.arange(len(X))
        stack = [(tree, idx)]
        while stack:
            node, rows = stack.pop()
            if not len(rows):
                continue
            if node.value is not None:
                out[rows] = node.value
                continue
            mask = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[mask]))
            stack.append((node.right, rows[~mask]))
        return out

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        votes = np.stack([self._tree_predict(t, X) for t in self.trees])
        if self.task == REGRESSION:
            return votes.mean(axis=0)
        counts = np.zeros((len(X), self.n_classes))
        for row in votes.astype(np.int64):
            counts[np.arange(len(X)), row] += 1.0
        return np.argmax(counts, axis=1)


def fit_forest(train: Dataset2D, config: ForestConfig, task: str) -> Forest:
    """Random forest of CART trees on bootstrap resamples, ceil(sqrt(d))
    candidate features per split; deterministic per seed via one rng stream
    per tree."""
    config.validate()
    if task not in (CLASSIFICATION, REGRESSION):
        raise ValueError(f"unknown task {task!r}")
    X = train.features
    if len(X) < 2:
        raise ValueError("need at least two rows")
    y = train.labels.astype(np.int64 if task == CLASSIFICATION else np.float64)
    n_classes = int(y.max()) + 1 if task == CLASSIFICATION else 0
    n_feats = int(math.ceil(math.sqrt(X.shape[1])))

    streams = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees, boots = [], []
    for ss in streams:
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, len(X), size=len(X))
        boots.append(idx)
        trees.append(_grow(X[idx], y[idx], 0, config, task, n_classes, n_feats, rng))
    return Forest(trees, task, n_classes, config, boots)


def accuracy(pred, truth) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("prediction / truth length mismatch")
    if pred.size == 0:
        raise ValueError("empty inputs")
    return float(np.mean(pred == truth))


def macro_f1(pred, truth, n_classes: int) -> float:
    """Unweighted mean per-class F1. A class absent from both sides scores 0
    and still enters the average; 0/0 precision or recall counts as 0."""
    pred, truth = np.asarray(pred, dtype=np.int64), np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError("prediction / truth length mismatch")
    if pred.size and (pred.max() >= n_classes or truth.max() >= n_classes):
        raise ValueError("label outside class range")
    scores = []
    for c in range(n_classes):
        tp = float(np.sum((pred == c) & (truth == c)))
        fp = float(np.sum((pred == c) & (truth != c)))
        fn = float(np.sum((pred != c) & (truth == c)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        scores.append(f1)
    return float(np.mean(scores))


def r_squared(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError("prediction / truth length mismatch")
    if pred.size < 2:
        raise ValueError("need at least two points")
    ss_tot = float(((truth - truth.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ValueError("R^2 is undefined for constant truth")
    ss_res = float(((truth - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot
