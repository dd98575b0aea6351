"""Regression trees with optionally differentially private split selection.

Split quality is variance reduction normalized by the parent variance, so every
candidate score lands in [0, 1] and the exponential mechanism runs with
sensitivity 1 by default. With privacy disabled, selection degenerates to the
usual greedy argmax and training consumes no randomness at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence, Union

import numpy as np

__all__ = [
    "InvalidSplitError",
    "PrivacyParams",
    "TreeParams",
    "SplitCandidate",
    "Leaf",
    "Internal",
    "TreeNode",
    "RegressionTree",
    "node_impurity",
    "information_gain",
    "enumerate_candidates",
    "exponential_weights",
    "roulette_wheel_select",
    "best_split_with_dp",
    "fit_tree",
    "predict_tree",
    "tree_mdi",
]


class InvalidSplitError(ValueError):
    """Raised when a proposed split leaves one child empty."""


@dataclass(frozen=True)
class PrivacyParams:
    """Budget for private split selection.

    ``epsilon`` is spent once per internal node; ``None`` disables the
    mechanism entirely. ``sensitivity`` is the worst-case change one record
    can cause in a candidate's score; normalized gains keep it at 1.
    """

    epsilon: float | None = None
    sensitivity: float = 1.0

    def __post_init__(self) -> None:
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.sensitivity > 0:
            raise ValueError(f"sensitivity must be positive, got {self.sensitivity}")

    @property
    def dp_enabled(self) -> bool:
        return self.epsilon is not None


@dataclass(frozen=True)
class TreeParams:
    """Growth limits for a single tree. ``max_depth=None`` means unlimited."""

    max_depth: int | None = 8
    min_samples_split: int = 4
    min_samples_leaf: int = 2

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2 * self.min_samples_leaf:
            raise ValueError("min_samples_split must be >= 2 * min_samples_leaf")


@dataclass(frozen=True)
class SplitCandidate:
    feature_index: int
    threshold: float
    gain: float


@dataclass
class Leaf:
    prediction: float
    weight: float


@dataclass
class Internal:
    feature_index: int
    threshold: float
    impurity: float
    weight: float
    gain: float  # absolute impurity reduction at this node, feeds MDI
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Internal, Leaf]


def node_impurity(targets) -> float:
    """Population variance of the targets reaching a node."""
    y = np.asarray(targets, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("impurity needs a non-empty target vector")
    return float(np.mean((y - y.mean()) ** 2))


def information_gain(feature_column, targets, threshold) -> float:
    """Normalized variance reduction of splitting at ``value <= threshold``.

    Returns a score in [0, 1]: the fraction of the parent variance removed by
    the weighted child variances. Raises ``InvalidSplitError`` if either child
    would be empty and ``ValueError`` on a pure parent.
    """
    x = np.asarray(feature_column, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two equal-length vectors with at least 2 rows")
    left = x <= threshold
    n_left = int(left.sum())
    if n_left == 0 or n_left == x.size:
        raise InvalidSplitError(f"threshold {threshold} leaves an empty child")
    parent = node_impurity(y)
    if parent <= 0.0:
        raise ValueError("parent node is pure, no split can improve it")
    w_left = n_left / x.size
    reduction = parent - w_left * node_impurity(y[left]) - (1.0 - w_left) * node_impurity(y[~left])
    return min(max(reduction / parent, 0.0), 1.0)


def _scan_feature(x: np.ndarray, y: np.ndarray, parent: float, n: int):
    """Thresholds and gains for one feature via a sorted prefix-sum sweep."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    # last index of each distinct value except the maximum: splitting there
    # sends that value left and keeps both children non-empty
    cut = np.nonzero(xs[:-1] < xs[1:])[0]
    if cut.size == 0:
        return None
    csum = np.cumsum(ys)
    csq = np.cumsum(ys * ys)
    n_left = cut + 1.0
    n_right = n - n_left
    mean_left = csum[cut] / n_left
    var_left = np.maximum(csq[cut] / n_left - mean_left**2, 0.0)
    mean_right = (csum[-1] - csum[cut]) / n_right
    var_right = np.maximum((csq[-1] - csq[cut]) / n_right - mean_right**2, 0.0)
    gains = (parent - (n_left / n) * var_left - (n_right / n) * var_right) / parent
    np.clip(gains, 0.0, 1.0, out=gains)
    return xs[cut], gains


def _candidate_table(X: np.ndarray, y: np.ndarray, parent: float):
    """All valid splits as (features, thresholds, gains) arrays.

    Rows are ordered by (feature index, threshold) ascending. Returns None
    when no feature admits a split with two non-empty children.
    """
    n = y.size
    feats: list[np.ndarray] = []
    thrs: list[np.ndarray] = []
    gains: list[np.ndarray] = []
    for j in range(X.shape[1]):
        scanned = _scan_feature(X[:, j], y, parent, n)
        if scanned is None:
            continue
        t, g = scanned
        feats.append(np.full(t.size, j, dtype=np.intp))
        thrs.append(t)
        gains.append(g)
    if not feats:
        return None
    return np.concatenate(feats), np.concatenate(thrs), np.concatenate(gains)


def enumerate_candidates(features, targets) -> list[SplitCandidate]:
    """Every valid split of the node, ordered by (feature, threshold).

    Thresholds are the unique observed values of each feature; candidates that
    would leave a child empty are dropped. Gains match ``information_gain``
    up to floating-point rounding.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size or y.size < 2:
        raise ValueError("need a 2-d feature matrix and targets with at least 2 rows")
    parent = node_impurity(y)
    if parent <= 0.0:
        raise ValueError("parent node is pure, no split can improve it")
    table = _candidate_table(X, y, parent)
    if table is None:
        return []
    return [
        SplitCandidate(int(f), float(t), float(g))
        for f, t, g in zip(*table)
    ]


def _softmax_probabilities(gains: np.ndarray, epsilon: float, sensitivity: float) -> np.ndarray:
    scores = (epsilon * gains) / (2.0 * sensitivity)
    scores = scores - scores.max()  # shift-invariant and overflow-proof
    w = np.exp(scores)
    return w / w.sum()


def exponential_weights(candidates: Sequence[SplitCandidate], privacy: PrivacyParams) -> np.ndarray:
    """Selection probabilities exp(eps * gain / (2 * sensitivity)), normalized."""
    if len(candidates) == 0:
        raise ValueError("no candidates to weight")
    if not privacy.dp_enabled:
        raise ValueError("exponential weights need an epsilon budget")
    gains = np.array([c.gain for c in candidates], dtype=float)
    return _softmax_probabilities(gains, privacy.epsilon, privacy.sensitivity)


def roulette_wheel_select(probabilities, rng: np.random.Generator) -> int:
    """Sample an index from a probability vector with one uniform draw.

    Walks the cumulative distribution in index order and returns the first
    bucket containing the draw, so equal seeds give equal picks.
    """
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("cannot select from an empty distribution")
    if (p < 0).any():
        raise ValueError("probabilities must be non-negative")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    u = rng.random()
    acc = 0.0
    for i, pi in enumerate(p):
        acc += pi
        if u < acc:
            return i
    return int(p.size - 1)  # u fell into the rounding slack past the last bucket


# float gains this close to the maximum may hide an exact tie; the sweep's
# own error is orders of magnitude below this
_TIE_WINDOW = 1e-9


def _exact_candidate_key(X, y, feature_index, threshold):
    """Weighted child deviance as an exact rational; lower means more gain.

    Exact ties between distinct candidates are real, not float accidents:
    complementary partitions of the same rows score identically, for one.
    Ranking the near-maximal candidates by this key lets the documented
    tie-break (lowest feature, then lowest threshold) decide true ties.
    """
    mask = X[:, feature_index] <= threshold
    total = Fraction(0)
    for side in (y[mask], y[~mask]):
        values = [Fraction(v) for v in side.tolist()]
        s = sum(values)
        total += sum(v * v for v in values) - s * s / len(values)
    return total


def _greedy_pick(X, y, feats, thrs, gains) -> int:
    best = int(np.argmax(gains))  # first max wins, giving the tie-break order
    near = np.nonzero(gains >= gains[best] - _TIE_WINDOW)[0]
    if near.size > 1:
        best = min(
            (int(i) for i in near),
            key=lambda i: (_exact_candidate_key(X, y, int(feats[i]), float(thrs[i])), i),
        )
    return best


def best_split_with_dp(features, targets, privacy: PrivacyParams, rng: np.random.Generator | None = None):
    """Choose a split for one node, privately or greedily.

    Returns ``(feature_index, threshold)`` or None when the node is pure,
    too small, or admits no valid split. With privacy enabled the choice is
    a roulette draw over exponential-mechanism weights and consumes exactly
    one uniform from ``rng``; without it, the best gain wins and ties break
    toward the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("features and targets disagree on the row count")
    if y.size < 2:
        return None
    parent = node_impurity(y)
    if parent <= 0.0:
        return None
    table = _candidate_table(X, y, parent)
    if table is None:
        return None
    feats, thrs, gains = table
    if privacy.dp_enabled:
        if rng is None:
            raise ValueError("private split selection needs an rng stream")
        probs = _softmax_probabilities(gains, privacy.epsilon, privacy.sensitivity)
        pick = roulette_wheel_select(probs, rng)
    else:
        pick = _greedy_pick(X, y, feats, thrs, gains)
    return int(feats[pick]), float(thrs[pick])


@dataclass
class RegressionTree:
    """A fitted tree plus the settings and budget that produced it."""

    root: TreeNode
    feature_count: int
    params: TreeParams
    privacy: PrivacyParams
    epsilon_spent: float = 0.0

    def predict_row(self, row) -> float:
        r = np.asarray(row, dtype=float)
        if r.shape != (self.feature_count,):
            raise ValueError(f"expected {self.feature_count} features, got shape {r.shape}")
        return self._walk(r)

    def _walk(self, row) -> float:
        node = self.root
        while isinstance(node, Internal):
            node = node.left if row[node.feature_index] <= node.threshold else node.right
        return node.prediction

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ValueError(f"expected a matrix with {self.feature_count} columns")
        out = np.empty(X.shape[0], dtype=float)
        for i, row in enumerate(X):
            out[i] = self._walk(row)
        return out

    def internal_nodes(self) -> Iterator[Internal]:
        stack: list[TreeNode] = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Internal):
                yield node
                stack.append(node.right)
                stack.append(node.left)

    def internal_node_count(self) -> int:
        return sum(1 for _ in self.internal_nodes())

    def leaf_count(self) -> int:
        return self.internal_node_count() + 1

    def depth(self) -> int:
        def rec(node: TreeNode) -> int:
            if isinstance(node, Leaf):
                return 0
            return 1 + max(rec(node.left), rec(node.right))

        return rec(self.root)

    def to_dict(self) -> dict:
        return {
            "feature_count": self.feature_count,
            "hyperparams": {
                "max_depth": self.params.max_depth,
                "min_samples_split": self.params.min_samples_split,
                "min_samples_leaf": self.params.min_samples_leaf,
            },
            "privacy": {
                "epsilon": self.privacy.epsilon,
                "sensitivity": self.privacy.sensitivity,
            },
            "epsilon_spent": self.epsilon_spent,
            "root": _node_to_dict(self.root),
        }

    def to_json(self) -> str:
        # json repr keeps every float exact on round-trip (17 significant digits)
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "RegressionTree":
        hp = doc["hyperparams"]
        pv = doc["privacy"]
        return cls(
            root=_node_from_dict(doc["root"]),
            feature_count=int(doc["feature_count"]),
            params=TreeParams(
                max_depth=hp["max_depth"],
                min_samples_split=int(hp["min_samples_split"]),
                min_samples_leaf=int(hp["min_samples_leaf"]),
            ),
            privacy=PrivacyParams(epsilon=pv["epsilon"], sensitivity=float(pv["sensitivity"])),
            epsilon_spent=float(doc["epsilon_spent"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "RegressionTree":
        return cls.from_dict(json.loads(text))


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"type": "leaf", "prediction": node.prediction, "weight": node.weight}
    return {
        "type": "internal",
        "feature": node.feature_index,
        "threshold": node.threshold,
        "impurity": node.impurity,
        "weight": node.weight,
        "gain": node.gain,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc: dict) -> TreeNode:
    kind = doc.get("type")
    if kind == "leaf":
        return Leaf(prediction=float(doc["prediction"]), weight=float(doc["weight"]))
    if kind == "internal":
        return Internal(
            feature_index=int(doc["feature"]),
            threshold=float(doc["threshold"]),
            impurity=float(doc["impurity"]),
            weight=float(doc["weight"]),
            # documents written by other tools may omit the gain; without it
            # the node simply contributes nothing to MDI
            gain=float(doc.get("gain", 0.0)),
            left=_node_from_dict(doc["left"]),
            right=_node_from_dict(doc["right"]),
        )
    raise ValueError(f"unknown node type {kind!r}")


def fit_tree(
    features,
    targets,
    params: TreeParams | None = None,
    privacy: PrivacyParams | None = None,
    rng: np.random.Generator | None = None,
) -> RegressionTree:
    """Grow a regression tree depth-first, left child first.

    Nodes stop splitting when pure, below ``min_samples_split``, at the depth
    limit, when no valid candidate exists, or when the chosen split would
    violate ``min_samples_leaf``. With privacy enabled, every internal node
    costs ``epsilon`` and the total is recorded on the returned tree.
    """
    params = params if params is not None else TreeParams()
    privacy = privacy if privacy is not None else PrivacyParams()
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    n, n_features = X.shape
    if n == 0 or n_features == 0 or y.shape != (n,):
        raise ValueError(f"feature matrix {X.shape} and targets {y.shape} do not line up")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ValueError("training data must be finite")
    if privacy.dp_enabled and rng is None:
        raise ValueError("private training needs an rng stream")

    internal_count = 0

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        nonlocal internal_count
        rows_y = y[idx]
        weight = idx.size / n
        impurity = node_impurity(rows_y)
        # constant targets: store the exact value, which is their exact mean
        if impurity == 0.0 or rows_y.min() == rows_y.max():
            return Leaf(float(rows_y[0]), weight)
        prediction = float(rows_y.mean())
        depth_capped = params.max_depth is not None and depth >= params.max_depth
        if depth_capped or idx.size < params.min_samples_split:
            return Leaf(prediction, weight)
        split = best_split_with_dp(X[idx], rows_y, privacy, rng)
        if split is None:
            return Leaf(prediction, weight)
        feature_index, threshold = split
        mask = X[idx, feature_index] <= threshold
        left_idx = idx[mask]
        right_idx = idx[~mask]
        if min(left_idx.size, right_idx.size) < params.min_samples_leaf:
            return Leaf(prediction, weight)
        internal_count += 1
        left = grow(left_idx, depth + 1)
        right = grow(right_idx, depth + 1)
        w_left = left_idx.size / idx.size
        reduction = (
            impurity
            - w_left * node_impurity(y[left_idx])
            - (1.0 - w_left) * node_impurity(y[right_idx])
        )
        return Internal(feature_index, threshold, impurity, weight, max(reduction, 0.0), left, right)

    root = grow(np.arange(n, dtype=np.intp), 0)
    spent = privacy.epsilon * internal_count if privacy.dp_enabled else 0.0
    return RegressionTree(root, n_features, params, privacy, spent)


def predict_tree(tree: RegressionTree, row) -> float:
    """Function form of ``RegressionTree.predict_row``."""
    return tree.predict_row(row)


def tree_mdi(tree: RegressionTree) -> np.ndarray:
    """Mean-decrease-in-impurity profile, normalized to sum to 1.

    Each internal node adds ``node weight * impurity reduction`` to its split
    feature. A tree with no internal nodes has nothing to attribute and
    returns the zero vector.
    """
    raw = np.zeros(tree.feature_count, dtype=float)
    for node in tree.internal_nodes():
        raw[node.feature_index] += node.weight * node.gain
    total = raw.sum()
    if total > 0.0:
        raw /= total
    return raw
