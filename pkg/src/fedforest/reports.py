"""Experiment output files: rounds.csv, mdi.csv, summary.json, per-run JSON.

Everything written here is a pure function of the results, so identical
configs and seeds produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import mdi_entropy
from .protocol import RoundReport

__all__ = ["ExperimentResult", "epsilon_label", "emit_reports", "build_summary"]


@dataclass
class ExperimentResult:
    """All rounds of one (epsilon, repeat) experiment."""

    epsilon: float | None
    repeat: int
    reports: list[RoundReport]

    def final_mdi(self, n_features: int) -> list[float]:
        for report in reversed(self.reports):
            if report.global_mdi is not None:
                return report.global_mdi
        return [0.0] * n_features


def epsilon_label(epsilon: float | None) -> str:
    return "none" if epsilon is None else format(epsilon, "g")


def _cell(value) -> str:
    """Fixed 15-significant-digit cell; missing values become nan."""
    if value is None:
        return "nan"
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return format(value, ".15g")


def _mean_std(values: list[float]):
    """Population mean/std of the available values; (None, None) when empty."""
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def build_summary(results: list[ExperimentResult], n_features: int) -> dict:
    """Per-epsilon, per-round means and stds across repeats.

    Rounds with no global model yet are skipped when averaging, and the
    number of contributing runs is reported next to each statistic.
    """
    by_label: dict[str, list[ExperimentResult]] = {}
    order: list[str] = []
    for result in results:
        label = epsilon_label(result.epsilon)
        if label not in by_label:
            by_label[label] = []
            order.append(label)
        by_label[label].append(result)

    summary: dict = {"epsilons": {}}
    for label in order:
        group = by_label[label]
        max_rounds = max(len(r.reports) for r in group)
        rounds = []
        for i in range(max_rounds):
            mses = [r.reports[i].global_mse_test for r in group if i < len(r.reports)]
            pearsons = [r.reports[i].global_pearson_test for r in group if i < len(r.reports)]
            counts = [len(r.reports[i].accepted) for r in group if i < len(r.reports)]
            mse_mean, mse_std = _mean_std([v for v in mses if v is not None])
            p_mean, p_std = _mean_std([v for v in pearsons if v is not None])
            acc_mean, _ = _mean_std([float(c) for c in counts])
            rounds.append(
                {
                    "round": i + 1,
                    "mse_mean": mse_mean,
                    "mse_std": mse_std,
                    "pearson_mean": p_mean,
                    "pearson_std": p_std,
                    "accepted_mean": acc_mean,
                    "runs_with_model": len([v for v in mses if v is not None]),
                }
            )
        final_mses = [r.reports[-1].global_mse_test for r in group]
        entropies = [mdi_entropy(r.final_mdi(n_features)) for r in group]
        f_mean, f_std = _mean_std([v for v in final_mses if v is not None])
        e_mean, e_std = _mean_std(entropies)
        summary["epsilons"][label] = {
            "repeats": len(group),
            "rounds": rounds,
            "final": {
                "mse_mean": f_mean,
                "mse_std": f_std,
                "mdi_entropy_mean": e_mean,
                "mdi_entropy_std": e_std,
            },
        }
    return summary


def emit_reports(results: list[ExperimentResult], out_dir, feature_names: list[str]) -> None:
    """Write the aggregated CSVs, the summary, and one JSON file per run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_features = len(feature_names)

    with (out / "rounds.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            [
                "epsilon",
                "repeat",
                "round",
                "global_mse",
                "global_pearson",
                "accepted_trees",
                "epsilon_spent_total",
            ]
        )
        for result in results:
            label = epsilon_label(result.epsilon)
            for report in result.reports:
                writer.writerow(
                    [
                        label,
                        result.repeat,
                        report.round_num,
                        _cell(report.global_mse_test),
                        _cell(report.global_pearson_test),
                        len(report.accepted),
                        _cell(report.epsilon_spent_total),
                    ]
                )

    with (out / "mdi.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["epsilon", "repeat", "feature_name", "mdi"])
        for result in results:
            label = epsilon_label(result.epsilon)
            profile = result.final_mdi(n_features)
            for name, value in zip(feature_names, profile):
                writer.writerow([label, result.repeat, name, _cell(value)])

    summary = build_summary(results, n_features)
    with (out / "summary.json").open("w") as handle:
        json.dump(summary, handle, indent=2)
        handle.write("\n")

    for result in results:
        run_dir = out / f"eps_{epsilon_label(result.epsilon)}" / f"rep_{result.repeat:02d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            "epsilon": result.epsilon,
            "repeat": result.repeat,
            "rounds": [r.to_dict() for r in result.reports],
        }
        with (run_dir / "report.json").open("w") as handle:
            json.dump(doc, handle, indent=2)
            handle.write("\n")
