"""Bagging ensembles of regression trees with provenance-aware ordering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import mse
from .tree import RegressionTree, tree_mdi

__all__ = [
    "EmptyModelError",
    "TreeRecord",
    "Forest",
    "bootstrap_sample",
    "predict_forest",
    "forest_mdi",
    "mse_of_model",
]


class EmptyModelError(ValueError):
    """A prediction was requested from a forest with no trees."""


@dataclass
class TreeRecord:
    """A tree plus where it came from and how the server scored it."""

    tree: RegressionTree
    client_id: int
    round_num: int
    tree_index: int = 0
    validation_score: float | None = None


def _record_key(rec: TreeRecord) -> tuple[int, int, int]:
    return (rec.round_num, rec.client_id, rec.tree_index)


@dataclass
class Forest:
    """An ordered collection of tree records acting as one mean predictor.

    Records are kept sorted by (round, client, tree index), so a forest built
    from any permutation of the same records predicts identically, float
    rounding included.
    """

    trees: list[TreeRecord] = field(default_factory=list)
    feature_count: int = 0

    def __post_init__(self) -> None:
        for rec in self.trees:
            if rec.tree.feature_count != self.feature_count:
                raise ValueError(
                    f"tree from client {rec.client_id} has {rec.tree.feature_count} "
                    f"features, forest expects {self.feature_count}"
                )
        self.trees = sorted(self.trees, key=_record_key)

    def __len__(self) -> int:
        return len(self.trees)

    def predict(self, features) -> np.ndarray:
        if not self.trees:
            raise EmptyModelError("forest has no trees")
        X = np.asarray(features, dtype=float)
        preds = np.stack([rec.tree.predict(X) for rec in self.trees])
        return preds.mean(axis=0)


def forest_of(records) -> Forest:
    """Build a forest from records, inferring the feature arity."""
    records = list(records)
    if not records:
        raise EmptyModelError("cannot build a forest from zero trees")
    return Forest(records, records[0].tree.feature_count)


def bootstrap_sample(features, targets, rng: np.random.Generator):
    """Draw n rows with replacement; same seed, same resample."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    n = y.size
    if n == 0 or X.shape[0] != n:
        raise ValueError("bootstrap needs at least one row and matching lengths")
    idx = rng.integers(0, n, size=n)
    return X[idx], y[idx]


def predict_forest(forest: Forest, row) -> float:
    """Mean of the member trees' predictions for one row."""
    r = np.asarray(row, dtype=float)
    return float(forest.predict(r[None, :])[0])


def forest_mdi(forest: Forest) -> np.ndarray:
    """Per-feature importance: mean of member MDI vectors, renormalized."""
    if not forest.trees:
        raise EmptyModelError("forest has no trees")
    profile = np.mean(np.stack([tree_mdi(rec.tree) for rec in forest.trees]), axis=0)
    total = profile.sum()
    if total > 0.0:
        profile /= total
    return profile


def mse_of_model(forest: Forest, features, targets) -> float:
    return mse(forest.predict(features), targets)
