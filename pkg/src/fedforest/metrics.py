"""Scalar evaluation metrics and importance-profile summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "mse",
    "pearson",
    "r_squared",
    "mdi_entropy",
    "MetricReport",
    "metric_report",
]


def _pair(predicted, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise ValueError(f"expected two equal-length vectors, got {p.shape} and {a.shape}")
    return p, a


def mse(predicted, actual) -> float:
    """Mean squared error between two equal-length vectors."""
    p, a = _pair(predicted, actual)
    if p.size == 0:
        raise ValueError("mse of empty vectors is undefined")
    return float(np.mean((p - a) ** 2))


def pearson(x, y) -> float | None:
    """Sample correlation coefficient, or None when either vector is constant."""
    dx, dy = _pair(x, y)
    if dx.size < 2:
        raise ValueError("pearson needs at least two points")
    dx = dx - dx.mean()
    dy = dy - dy.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def r_squared(predicted, actual) -> float:
    """Coefficient of determination, 1 - mse / var(actual).

    Unbounded below: a model worse than the target mean scores negative.
    Raises when the targets are constant, since the score is undefined there.
    """
    p, a = _pair(predicted, actual)
    if p.size < 2:
        raise ValueError("r_squared needs at least two points")
    var = float(np.mean((a - a.mean()) ** 2))
    if var == 0.0:
        raise ValueError("r_squared is undefined for constant targets")
    return 1.0 - mse(p, a) / var


def mdi_entropy(importances) -> float:
    """Shannon entropy (nats) of a normalized importance vector.

    The vector is renormalized defensively; zero entries contribute nothing.
    An all-zero vector has no distribution to speak of and scores 0.
    """
    v = np.asarray(importances, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("importances must be a non-empty vector")
    if (v < 0).any():
        raise ValueError("importances must be non-negative")
    total = v.sum()
    if total <= 0.0:
        return 0.0
    p = v / total
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class MetricReport:
    """Joint quality/explainability snapshot of one model on one dataset."""

    mse: float
    pearson: float | None
    r_squared: float
    mdi_entropy: float
    mdi_top_feature: int


def metric_report(predicted, actual, importances) -> MetricReport:
    v = np.asarray(importances, dtype=float)
    return MetricReport(
        mse=mse(predicted, actual),
        pearson=pearson(predicted, actual),
        r_squared=r_squared(predicted, actual),
        mdi_entropy=mdi_entropy(v),
        mdi_top_feature=int(np.argmax(v)),
    )
