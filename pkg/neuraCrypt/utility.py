"""Downstream-utility proxy: logistic regression on mean-pooled patch vectors."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from neuraCrypt.config import UTILITY_LEARNING_RATE, UTILITY_SEED, UTILITY_STEPS
from neuraCrypt.errors import DimMismatch, EmptySet, SingleClassData
from neuraCrypt.metrics import LogisticRegression, accuracy, mean_pool, roc_auc

logger = logging.getLogger("neuraCrypt.Utility")

L2_GRID = (0.0, 1e-3, 1e-2, 1e-1)
SPLIT = (0.6, 0.2, 0.2)


@dataclass(frozen=True)
class OwnerShard:
    owner_id: str
    patch_sets: Sequence[np.ndarray]
    labels: Sequence[int]


@dataclass
class UtilityReport:
    accuracy: float | None
    auc: float | None
    l2: float
    train_size: int
    dev_size: int
    test_size: int
    per_owner: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": "utility",
            "accuracy": self.accuracy,
            "auc": self.auc,
            "l2": self.l2,
            "train_size": self.train_size,
            "dev_size": self.dev_size,
            "test_size": self.test_size,
            "per_owner": self.per_owner,
        }


def stratified_split(groups: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """60-20-20 split of indices, done separately inside every group.

    Every group of two or more members puts at least one in test; a group of one
    goes to train.
    """
    rng = np.random.default_rng(seed)
    train, dev, test = [], [], []
    for group in np.unique(groups, axis=0):
        members = np.flatnonzero(np.all(groups == group, axis=1))
        members = members[rng.permutation(len(members))]
        if len(members) == 1:
            train.extend(members)
            continue
        n_test = max(1, int(round(SPLIT[2] * len(members))))
        n_dev = max(1, int(round(SPLIT[1] * len(members)))) if len(members) > 2 else 0
        test.extend(members[:n_test])
        dev.extend(members[n_test : n_test + n_dev])
        train.extend(members[n_test + n_dev :])
    return tuple(np.sort(np.asarray(part, dtype=np.int64)) for part in (train, dev, test))


def _scores(
    classifier: LogisticRegression, X: np.ndarray, y: np.ndarray, what: str = "test split"
) -> tuple[float | None, float | None]:
    """Accuracy and AUC; AUC is None for a single-class split, both are None for an empty one."""
    if not len(y):
        logger.warning("The %s is empty, it has no accuracy or AUC", what)
        return None, None
    predictions = classifier.predict(X)
    try:
        auc = roc_auc(classifier.decision_function(X), y)
    except SingleClassData:
        logger.warning("The %s holds a single class, its AUC is undefined", what)
        auc = None
    return accuracy(predictions, y), auc


def utility_proxy(
    owners: Sequence[OwnerShard],
    seed: int = UTILITY_SEED,
    steps: int = UTILITY_STEPS,
    learning_rate: float = UTILITY_LEARNING_RATE,
    l2_grid: Sequence[float] = L2_GRID,
) -> UtilityReport:
    """Train on the pooled shards, pick L2 on the dev split, report test metrics.

    Per-owner metrics are computed on each owner's part of the pooled test split.
    """
    if not owners:
        raise EmptySet("No owner shards to evaluate")
    features, labels, owner_index = [], [], []
    for index, shard in enumerate(owners):
        if len(shard.patch_sets) != len(shard.labels):
            raise DimMismatch(
                f"Owner {shard.owner_id} has {len(shard.patch_sets)} samples "
                f"but {len(shard.labels)} labels"
            )
        features.append(mean_pool(shard.patch_sets))
        labels.extend(int(y) for y in shard.labels)
        owner_index.extend([index] * len(shard.labels))
    if len({f.shape[1] for f in features}) != 1:
        raise DimMismatch("Owner shards have different feature dimensions")
    X = np.concatenate(features)
    y = np.asarray(labels, dtype=np.int64)
    owner_index = np.asarray(owner_index)
    if len(np.unique(y)) < 2:
        raise SingleClassData("Utility evaluation needs both classes")

    train, dev, test = stratified_split(np.column_stack([owner_index, y]), seed)
    if len(np.unique(y[train])) < 2:
        raise SingleClassData("The training split holds a single class")
    best, best_l2, best_score = None, 0.0, -np.inf
    for l2 in l2_grid:
        classifier = LogisticRegression(steps=steps, learning_rate=learning_rate, l2=l2)
        classifier.fit(X[train], y[train])
        score = accuracy(classifier.predict(X[dev]), y[dev]) if len(dev) else 0.0
        logger.trace("Utility dev accuracy with l2=%s: %.4f", l2, score)
        if score > best_score:
            best, best_l2, best_score = classifier, l2, score

    test_accuracy, test_auc = _scores(best, X[test], y[test])
    per_owner = {}
    if len(owners) > 1:
        for index, shard in enumerate(owners):
            rows = test[owner_index[test] == index]
            what = f"test split of {shard.owner_id}"
            owner_accuracy, owner_auc = _scores(best, X[rows], y[rows], what)
            per_owner[shard.owner_id] = {"accuracy": owner_accuracy, "auc": owner_auc}
    logger.debug("Utility proxy: accuracy=%s, auc=%s, l2=%s", test_accuracy, test_auc, best_l2)
    return UtilityReport(
        accuracy=test_accuracy,
        auc=test_auc,
        l2=best_l2,
        train_size=len(train),
        dev_size=len(dev),
        test_size=len(test),
        per_owner=per_owner,
    )


def raw_pixel_shards(images: np.ndarray) -> list[np.ndarray]:
    """The raw-pixel oracle: each image flattened into a single (1, H*W*C) patch set."""
    images = np.asarray(images, dtype=np.float64)
    return [image.reshape(1, -1) for image in images]
