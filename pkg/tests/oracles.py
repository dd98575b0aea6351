"""Hand-rolled reference implementations used to cross-check the library.

Everything here is written the slow, obvious way in pure Python and shares
no code with the package under test.
"""

from __future__ import annotations

import math
from fractions import Fraction


def mean_oracle(values):
    return sum(values) / len(values)


def variance_oracle(values):
    m = mean_oracle(values)
    return sum((v - m) ** 2 for v in values) / len(values)


def mse_oracle(predicted, actual):
    return mean_oracle([(p - a) ** 2 for p, a in zip(predicted, actual)])


def pearson_oracle(x, y):
    mx, my = mean_oracle(x), mean_oracle(y)
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = math.sqrt(sum((a - mx) ** 2 for a in x)) * math.sqrt(sum((b - my) ** 2 for b in y))
    return num / den


def r_squared_oracle(predicted, actual):
    return 1.0 - mse_oracle(predicted, actual) / variance_oracle(actual)


def entropy_oracle(weights):
    total = sum(weights)
    if total <= 0:
        return 0.0
    return -sum((w / total) * math.log(w / total) for w in weights if w > 0)


def gain_oracle(column, targets, threshold):
    """Normalized variance reduction, straight from the definition."""
    left = [t for c, t in zip(column, targets) if c <= threshold]
    right = [t for c, t in zip(column, targets) if c > threshold]
    parent = variance_oracle(targets)
    n = len(targets)
    reduction = (
        parent
        - len(left) / n * variance_oracle(left)
        - len(right) / n * variance_oracle(right)
    )
    return min(max(reduction / parent, 0.0), 1.0)


def softmax_oracle(scores):
    weights = [math.exp(s) for s in scores]
    total = sum(weights)
    return [w / total for w in weights]


def mechanism_probabilities_oracle(gains, epsilon, sensitivity=1.0):
    return softmax_oracle([epsilon * g / (2.0 * sensitivity) for g in gains])


def candidates_oracle(X, y):
    """Exhaustive (feature, threshold, gain) enumeration in contract order."""
    n = len(y)
    found = []
    for f in range(len(X[0])):
        for threshold in sorted({row[f] for row in X}):
            left = [y[i] for i in range(n) if X[i][f] <= threshold]
            right = [y[i] for i in range(n) if X[i][f] > threshold]
            if not left or not right:
                continue
            found.append((f, threshold, gain_oracle([row[f] for row in X], y, threshold)))
    return found


def exact_partition_weight_oracle(column, targets, threshold):
    """Sum over children of (sum of squares - square of sum / count), exactly.

    Ordering candidates by this rational equals ordering them by true gain,
    descending; float-identical gains from genuinely tied partitions compare
    equal here instead of in whatever order rounding noise put them.
    """
    total = Fraction(0)
    for side in (
        [t for c, t in zip(column, targets) if c <= threshold],
        [t for c, t in zip(column, targets) if c > threshold],
    ):
        values = [Fraction(v) for v in side]
        s = sum(values)
        total += sum(v * v for v in values) - s * s / len(values)
    return total


def greedy_splits_oracle(X, y, max_depth, min_samples_split, min_samples_leaf):
    """Preorder (feature, threshold) sequence of a plain greedy CART fit.

    Mirrors the documented growth contract: depth-first, left child first,
    leaf on pure/undersized/depth-capped nodes, candidate order (feature asc,
    threshold asc) with first-max tie-breaking, and the chosen split is
    abandoned if it violates min_samples_leaf. Candidates whose float gains
    sit within 1e-9 of the best are re-ranked with exact arithmetic so that
    true ties fall to the tie-break rather than to rounding noise.
    """
    splits = []

    def grow(rows, depth):
        targets = [y[i] for i in rows]
        if min(targets) == max(targets):
            return
        if depth >= max_depth or len(rows) < min_samples_split:
            return
        sub_X = [X[i] for i in rows]
        cands = candidates_oracle(sub_X, targets)
        if not cands:
            return
        best = max(cands, key=lambda c: c[2])  # ties: first in contract order
        near = [(i, c) for i, c in enumerate(cands) if c[2] >= best[2] - 1e-9]
        if len(near) > 1:
            ranked = min(
                near,
                key=lambda pair: (
                    exact_partition_weight_oracle(
                        [row[pair[1][0]] for row in sub_X], targets, pair[1][1]
                    ),
                    pair[0],
                ),
            )
            best = ranked[1]
        f, threshold, _ = best
        left = [i for i in rows if X[i][f] <= threshold]
        right = [i for i in rows if X[i][f] > threshold]
        if min(len(left), len(right)) < min_samples_leaf:
            return
        splits.append((f, threshold))
        grow(left, depth + 1)
        grow(right, depth + 1)

    grow(list(range(len(y))), 0)
    return splits


def collect_splits(node):
    """Preorder (feature, threshold) sequence from a fitted tree's root node."""
    out = []

    def walk(n):
        if not hasattr(n, "feature_index"):
            return
        out.append((n.feature_index, n.threshold))
        walk(n.left)
        walk(n.right)

    walk(node)
    return out


def mdi_from_data_oracle(root, n_features, X, y):
    """Recompute normalized MDI by re-routing the data through the tree."""
    n_total = len(y)
    raw = [0.0] * n_features

    def walk(node, rows):
        if not hasattr(node, "feature_index"):
            return
        f = node.feature_index
        threshold = node.threshold
        left = [i for i in rows if X[i][f] <= threshold]
        right = [i for i in rows if X[i][f] > threshold]
        parent = variance_oracle([y[i] for i in rows])
        reduction = (
            parent
            - len(left) / len(rows) * variance_oracle([y[i] for i in left])
            - len(right) / len(rows) * variance_oracle([y[i] for i in right])
        )
        raw[f] += len(rows) / n_total * reduction
        walk(node.left, left)
        walk(node.right, right)

    walk(root, list(range(n_total)))
    total = sum(raw)
    return [v / total for v in raw] if total > 0 else raw


class CountingRng:
    """Feeds a scripted sequence of uniforms and counts consumption."""

    def __init__(self, draws):
        self.draws = list(draws)
        self.consumed = 0

    def random(self):
        value = self.draws[self.consumed]
        self.consumed += 1
        return value
