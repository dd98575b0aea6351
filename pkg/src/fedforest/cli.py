"""Command-line experiment runner.

``fedforest run --config exp.toml --out reports`` executes the configured
epsilon grid, repeats included, and writes rounds.csv, mdi.csv, summary.json,
and one report.json per (epsilon, repeat) run under the output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .data import DataError
from .protocol import load_dataset, run_experiment
from .reports import ExperimentResult, emit_reports, epsilon_label

__all__ = ["main", "parse_epsilon_grid"]


def parse_epsilon_grid(text: str) -> tuple[float | None, ...]:
    """Parse a comma-separated epsilon list; "none" disables privacy."""
    out: list[float | None] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if token.lower() == "none":
            out.append(None)
        else:
            try:
                value = float(token)
            except ValueError:
                raise ConfigError(f"bad epsilon value {token!r}") from None
            out.append(value)
    if not out:
        raise ConfigError("epsilon list is empty")
    return tuple(out)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedforest",
        description="Federated regression-tree training with optional differential privacy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the configured experiment grid")
    run.add_argument("--config", required=True, type=Path, help="TOML experiment config")
    run.add_argument("--out", type=Path, default=Path("reports"), help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override general_seed")
    run.add_argument(
        "--epsilon",
        type=str,
        default=None,
        help='override the epsilon grid, e.g. "none,0.01,1"',
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, general_seed=args.seed)
        if args.epsilon is not None:
            cfg = dataclasses.replace(cfg, epsilons=parse_epsilon_grid(args.epsilon))
        cfg.validate()

        feature_names = load_dataset(cfg, 0).feature_names
        results = []
        for eps in cfg.epsilons:
            for repeat in range(cfg.repeats):
                reports = run_experiment(cfg, eps, repeat)
                results.append(ExperimentResult(eps, repeat, reports))
                last = reports[-1]
                shown = "n/a" if last.global_mse_test is None else format(last.global_mse_test, ".6g")
                print(
                    f"eps={epsilon_label(eps)} repeat={repeat} "
                    f"rounds={len(reports)} final_mse={shown}"
                )
        emit_reports(results, args.out, feature_names)
        print(f"wrote {args.out}/rounds.csv, mdi.csv, summary.json ({len(results)} runs)")
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
