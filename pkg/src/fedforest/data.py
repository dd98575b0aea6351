"""Dataset ingestion, splitting, client partitioning, and synthetic data.

All tabular data is held as a float64 feature matrix plus a target vector.
CSV ingestion is deliberately strict: the caller names the target, the columns
to drop, and the datetime columns to expand; anything else must parse as a
finite number or the whole row is dropped and counted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from .rng import make_rng

__all__ = [
    "DataError",
    "Dataset",
    "PartitionPlan",
    "load_csv",
    "save_csv",
    "train_test_split",
    "partition_clients",
    "synth_dataset",
]


class DataError(ValueError):
    """Raised when a data source cannot produce a usable dataset."""


@dataclass
class Dataset:
    """An immutable-by-convention table of features and a numeric target."""

    feature_names: list[str]
    features: np.ndarray
    targets: np.ndarray
    target_name: str = "target"
    dropped_rows: int = 0

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        n, f = self.features.shape
        if self.targets.shape != (n,):
            raise DataError(f"{n} feature rows but {self.targets.shape} targets")
        if len(self.feature_names) != f:
            raise DataError(f"{f} feature columns but {len(self.feature_names)} names")
        if not np.isfinite(self.features).all() or not np.isfinite(self.targets).all():
            raise DataError("dataset contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, indices) -> "Dataset":
        """A new dataset holding the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        return replace(self, features=self.features[idx], targets=self.targets[idx], dropped_rows=0)


@dataclass(frozen=True)
class PartitionPlan:
    """How training rows are dealt out to clients."""

    general_seed: int
    num_clients: int
    mode: str = "disjoint"  # "disjoint" | "sample"

    def __post_init__(self) -> None:
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if self.mode not in ("disjoint", "sample"):
            raise ValueError(f"unknown partition mode {self.mode!r}")


def _parse_number(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if np.isfinite(value) else None


def _parse_timestamp(cell: str, fmt: str | None) -> tuple[float, float] | None:
    """(hour of day, day of week) from a timestamp cell, or None if unparseable."""
    try:
        dt = datetime.strptime(cell, fmt) if fmt else datetime.fromisoformat(cell)
    except ValueError:
        return None
    hour = dt.hour + dt.minute / 60.0 + dt.second / 3600.0
    return hour, float(dt.weekday())


def load_csv(
    path,
    target_column: str,
    datetime_columns=(),
    drop_columns=(),
    datetime_format: str | None = None,
) -> Dataset:
    """Read a CSV file into a Dataset.

    Columns listed in ``drop_columns`` are ignored. Columns listed in
    ``datetime_columns`` are each expanded, in place, into two features:
    hour-of-day (fractional) and day-of-week (Monday=0). Every remaining
    column must hold finite numbers; a row with any unparseable cell is
    dropped and counted in ``dropped_rows``.
    """
    path = Path(path)
    datetime_columns = set(datetime_columns)
    drop_columns = set(drop_columns)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        for name in (target_column, *datetime_columns, *drop_columns):
            if name not in header:
                raise DataError(f"{path}: no column named {name!r}")
        if target_column in datetime_columns or target_column in drop_columns:
            raise DataError(f"{path}: target column {target_column!r} cannot be dropped or expanded")

        feature_names: list[str] = []
        # (source column position, kind) in original header order
        layout: list[tuple[int, str]] = []
        for pos, name in enumerate(header):
            if name == target_column or name in drop_columns:
                continue
            if name in datetime_columns:
                feature_names.extend([f"{name}_hour", f"{name}_dow"])
                layout.append((pos, "datetime"))
            else:
                feature_names.append(name)
                layout.append((pos, "numeric"))
        if not feature_names:
            raise DataError(f"{path}: no feature columns left after drops")
        target_pos = header.index(target_column)

        rows: list[list[float]] = []
        targets: list[float] = []
        dropped = 0
        total = 0
        for record in reader:
            if not record:
                continue  # blank trailing lines are not data
            total += 1
            if len(record) != len(header):
                dropped += 1
                continue
            parsed: list[float] = []
            ok = True
            for pos, kind in layout:
                if kind == "numeric":
                    value = _parse_number(record[pos])
                    if value is None:
                        ok = False
                        break
                    parsed.append(value)
                else:
                    stamp = _parse_timestamp(record[pos], datetime_format)
                    if stamp is None:
                        ok = False
                        break
                    parsed.extend(stamp)
            target = _parse_number(record[target_pos]) if ok else None
            if not ok or target is None:
                dropped += 1
                continue
            rows.append(parsed)
            targets.append(target)

    if total == 0:
        raise DataError(f"{path}: no data rows")
    if not rows:
        raise DataError(f"{path}: all {total} rows were dropped as unparseable")
    return Dataset(
        feature_names=feature_names,
        features=np.array(rows, dtype=float),
        targets=np.array(targets, dtype=float),
        target_name=target_column,
        dropped_rows=dropped,
    )


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset as CSV with full-precision floats (loads back exactly)."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([*dataset.feature_names, dataset.target_name])
        for row, target in zip(dataset.features, dataset.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def train_test_split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0):
    """Seeded shuffle, then cut: same seed, same split; disjoint and exhaustive."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = dataset.n_rows
    n_train = int(round(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise DataError(f"split of {n} rows at {train_fraction} leaves an empty side")
    perm = make_rng(seed).permutation(n)
    return dataset.take(perm[:n_train]), dataset.take(perm[n_train:])


def partition_clients(dataset: Dataset, plan: PartitionPlan) -> list[Dataset]:
    """Deal training rows to clients.

    ``disjoint`` shuffles once with the general seed and cuts near-equal
    contiguous chunks (sizes differ by at most one). ``sample`` has client c
    draw ``n_rows // num_clients`` rows with replacement from its own stream,
    seeded by ``general_seed + c``.
    """
    n = dataset.n_rows
    if plan.num_clients > n:
        raise DataError(f"cannot partition {n} rows across {plan.num_clients} clients")
    if plan.mode == "disjoint":
        perm = make_rng(plan.general_seed).permutation(n)
        return [dataset.take(chunk) for chunk in np.array_split(perm, plan.num_clients)]
    per_client = n // plan.num_clients
    out = []
    for c in range(plan.num_clients):
        rng = make_rng(plan.general_seed + c)
        out.append(dataset.take(rng.integers(0, n, size=per_client)))
    return out


def synth_dataset(
    n_rows: int = 2000,
    n_features: int = 8,
    dominant_feature_weight: float = 8.0,
    noise_sd: float = 0.25,
    seed: int = 0,
    secondary_weight_fraction: float = 0.2,
) -> Dataset:
    """Generate a regression table with one deliberately dominant feature.

    Features are uniform on [0, 1]. The target leans on feature 0 through a
    linear ramp plus a large step at 0.5; every other feature enters linearly
    with weight ``secondary_weight_fraction * dominant_feature_weight``, and
    feature 1 adds a small step of its own. The fraction is capped at 0.2 so
    the dominant weight stays at least 5x every secondary weight, which keeps
    feature 0 on top of any reasonable importance profile. With the fraction
    at 0 the target depends on feature 0 alone.
    """
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    if n_features < 2:
        raise ValueError("n_features must be >= 2")
    if not dominant_feature_weight > 0:
        raise ValueError("dominant_feature_weight must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    if not 0.0 <= secondary_weight_fraction <= 0.2:
        raise ValueError("secondary_weight_fraction must be in [0, 0.2]")

    rng = make_rng(seed)
    X = rng.random((n_rows, n_features))
    w0 = dominant_feature_weight
    ws = secondary_weight_fraction * w0
    y = w0 * (0.25 * X[:, 0] + (X[:, 0] > 0.5))
    y = y + ws * (X[:, 1:].sum(axis=1) + 0.75 * (X[:, 1] > 0.7))
    if noise_sd > 0:
        y = y + rng.normal(0.0, noise_sd, n_rows)
    return Dataset(
        feature_names=[f"x{j}" for j in range(n_features)],
        features=X,
        targets=y,
        target_name="y",
    )
