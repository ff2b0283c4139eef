from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from neuraCrypt.config import UTILITY_LEARNING_RATE, UTILITY_STEPS
from neuraCrypt.errors import DimMismatch, EmptySet, SingleClassData

logger = logging.getLogger("neuraCrypt.Metrics")


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC: Pr[score(pos) > score(neg)] with ties counted as one half."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DimMismatch(f"{scores.size} scores given for {labels.size} labels")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassData("ROC AUC needs at least one positive and one negative sample")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores), dtype=np.float64)
    start = 0
    while start < len(scores):
        stop = start
        while stop + 1 < len(scores) and sorted_scores[stop + 1] == sorted_scores[start]:
            stop += 1
        ranks[order[start : stop + 1]] = (start + stop) / 2.0 + 1.0
        start = stop + 1
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    predictions = np.asarray(predictions).ravel()
    labels = np.asarray(labels).ravel()
    if predictions.size == 0:
        raise EmptySet("No predictions to score")
    return float(np.mean(predictions == labels))


def mean_pool(patch_sets: Sequence[np.ndarray]) -> np.ndarray:
    """One feature row per sample: the mean of its patch vectors (order-free)."""
    if not len(patch_sets):
        raise EmptySet("No patch sets to pool")
    return np.stack([np.asarray(p, dtype=np.float64).mean(axis=0) for p in patch_sets])


def _standardize(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


class LogisticRegression:
    """Binary logistic regression on standardized features, full-batch gradient descent."""

    def __init__(
        self,
        steps: int = UTILITY_STEPS,
        learning_rate: float = UTILITY_LEARNING_RATE,
        l2: float = 0.0,
    ):
        self.steps = steps
        self.learning_rate = learning_rate
        self.l2 = l2
        self.coef_ = None
        self.intercept_ = 0.0
        self.mean_ = None
        self.scale_ = None
        self.loss_ = None

    def fit(self, features: np.ndarray, labels: Sequence[int]) -> LogisticRegression:
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64).ravel()
        if features.ndim != 2 or len(features) != len(labels):
            raise DimMismatch(f"{len(features)} feature rows given for {len(labels)} labels")
        if len(np.unique(labels)) < 2:
            raise SingleClassData("Logistic regression needs both classes")
        self.mean_, self.scale_ = _standardize(features)
        X = (features - self.mean_) / self.scale_
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        for _ in range(self.steps):
            p = _sigmoid(X @ w + b)
            residual = p - labels
            w -= self.learning_rate * (X.T @ residual / n + self.l2 * w)
            b -= self.learning_rate * residual.mean()
        self.coef_, self.intercept_ = w, b
        self.loss_ = _cross_entropy(_sigmoid(X @ w + b), labels)
        return self

    def decision_function(self, features: np.ndarray, own_statistics: bool = False) -> np.ndarray:
        """Logits; ``own_statistics`` standardizes ``features`` with their own mean and std."""
        features = np.asarray(features, dtype=np.float64)
        if self.coef_ is None:
            raise EmptySet("The classifier has not been fitted")
        if features.shape[1] != len(self.coef_):
            raise DimMismatch(f"Expected {len(self.coef_)} features, got {features.shape[1]}")
        mean, scale = _standardize(features) if own_statistics else (self.mean_, self.scale_)
        return ((features - mean) / scale) @ self.coef_ + self.intercept_

    def predict_proba(self, features: np.ndarray, own_statistics: bool = False) -> np.ndarray:
        return _sigmoid(self.decision_function(features, own_statistics))

    def predict(self, features: np.ndarray, own_statistics: bool = False) -> np.ndarray:
        return (self.decision_function(features, own_statistics) > 0).astype(np.int64)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _cross_entropy(p: np.ndarray, labels: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(labels * np.log(p) + (1 - labels) * np.log(1 - p)))
