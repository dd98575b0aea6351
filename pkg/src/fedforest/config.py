"""Experiment configuration: validated dataclasses with TOML round-trip.

Reading uses ``tomli``. Writing is a small purpose-built emitter for this one
schema, kept lossless so ``load_config(save_config(cfg)) == cfg``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import tomli

from .tree import TreeParams

__all__ = [
    "ConfigError",
    "SyntheticSpec",
    "CsvSpec",
    "ExperimentConfig",
    "load_config",
    "save_config",
    "config_to_toml",
]


class ConfigError(ValueError):
    """Raised when a configuration file or value is unusable."""


@dataclass(frozen=True)
class SyntheticSpec:
    n_rows: int = 2000
    n_features: int = 8
    dominant_feature_weight: float = 8.0
    noise_sd: float = 0.25
    secondary_weight_fraction: float = 0.2


@dataclass(frozen=True)
class CsvSpec:
    path: str = ""
    target_column: str = ""
    datetime_columns: tuple[str, ...] = ()
    drop_columns: tuple[str, ...] = ()
    datetime_format: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a full experiment grid needs; one of synthetic/csv is the source."""

    general_seed: int = 7
    num_clients: int = 20
    num_rounds: int = 10
    threshold_k: float = 0.5
    epsilons: tuple[float | None, ...] = (None, 0.01, 0.1, 1.0, 10.0)
    repeats: int = 1
    trees_per_client: int = 1
    aggregation: str = "replace"  # "replace" | "accumulate"
    max_global_trees: int | None = None
    sensitivity: float = 1.0
    train_fraction: float = 0.8
    client_holdout_fraction: float = 0.2
    partition_mode: str = "disjoint"
    plateau_tol: float | None = None
    patience: int = 2
    tree: TreeParams = TreeParams()
    synthetic: SyntheticSpec | None = SyntheticSpec()
    csv: CsvSpec | None = None

    def validate(self) -> "ExperimentConfig":
        if self.general_seed < 0:
            raise ConfigError("general_seed must be non-negative")
        if self.num_clients < 1:
            raise ConfigError("num_clients must be >= 1")
        if self.num_rounds < 1:
            raise ConfigError("num_rounds must be >= 1")
        if not (self.threshold_k == self.threshold_k and abs(self.threshold_k) != float("inf")):
            raise ConfigError("threshold_k must be finite")
        if not self.epsilons:
            raise ConfigError("epsilon grid must not be empty")
        for eps in self.epsilons:
            if eps is not None and not eps > 0:
                raise ConfigError(f"epsilon values must be positive or none, got {eps}")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.trees_per_client < 1:
            raise ConfigError("trees_per_client must be >= 1")
        if self.aggregation not in ("replace", "accumulate"):
            raise ConfigError(f"unknown aggregation strategy {self.aggregation!r}")
        if self.max_global_trees is not None and self.max_global_trees < 1:
            raise ConfigError("max_global_trees must be >= 1 or unset")
        if not self.sensitivity > 0:
            raise ConfigError("sensitivity must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if not 0.0 < self.client_holdout_fraction < 1.0:
            raise ConfigError("client_holdout_fraction must be in (0, 1)")
        if self.partition_mode not in ("disjoint", "sample"):
            raise ConfigError(f"unknown partition mode {self.partition_mode!r}")
        if self.plateau_tol is not None and self.plateau_tol < 0:
            raise ConfigError("plateau_tol must be non-negative or unset")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if (self.synthetic is None) == (self.csv is None):
            raise ConfigError("exactly one of [synthetic] and [csv] must be configured")
        try:
            TreeParams(self.tree.max_depth, self.tree.min_samples_split, self.tree.min_samples_leaf)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self


# keys that may be "none" in TOML (which has no null) map to Python None
_OPTIONAL_KEYS = {"max_global_trees", "plateau_tol"}

_TOP_LEVEL_KEYS = {
    "general_seed": int,
    "num_clients": int,
    "num_rounds": int,
    "threshold_k": float,
    "repeats": int,
    "trees_per_client": int,
    "aggregation": str,
    "max_global_trees": int,
    "sensitivity": float,
    "train_fraction": float,
    "client_holdout_fraction": float,
    "partition_mode": str,
    "plateau_tol": float,
    "patience": int,
}


def _coerce(name: str, value, kind):
    if name in _OPTIONAL_KEYS and isinstance(value, str) and value.lower() == "none":
        return None
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"{name} must be of type {kind.__name__}, got {value!r}")
    return value


def _parse_epsilons(raw) -> tuple[float | None, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("epsilons must be a non-empty array")
    out: list[float | None] = []
    for item in raw:
        if isinstance(item, str):
            if item.lower() != "none":
                raise ConfigError(f'epsilon entries must be numbers or "none", got {item!r}')
            out.append(None)
        elif isinstance(item, (int, float)) and not isinstance(item, bool):
            out.append(float(item))
        else:
            raise ConfigError(f'epsilon entries must be numbers or "none", got {item!r}')
    return tuple(out)


def _from_mapping(doc: dict) -> ExperimentConfig:
    known = set(_TOP_LEVEL_KEYS) | {"epsilons", "tree", "synthetic", "csv"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for name, kind in _TOP_LEVEL_KEYS.items():
        if name in doc:
            kwargs[name] = _coerce(name, doc[name], kind)
    if "epsilons" in doc:
        kwargs["epsilons"] = _parse_epsilons(doc["epsilons"])

    if "tree" in doc:
        tree_doc = dict(doc["tree"])
        unknown = set(tree_doc) - {"max_depth", "min_samples_split", "min_samples_leaf"}
        if unknown:
            raise ConfigError(f"unknown [tree] keys: {sorted(unknown)}")
        defaults = TreeParams()
        max_depth = tree_doc.get("max_depth", defaults.max_depth)
        if isinstance(max_depth, str) and max_depth.lower() == "none":
            max_depth = None
        try:
            kwargs["tree"] = TreeParams(
                max_depth=max_depth,
                min_samples_split=tree_doc.get("min_samples_split", defaults.min_samples_split),
                min_samples_leaf=tree_doc.get("min_samples_leaf", defaults.min_samples_leaf),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    if "csv" in doc:
        csv_doc = dict(doc["csv"])
        unknown = set(csv_doc) - {
            "path",
            "target_column",
            "datetime_columns",
            "drop_columns",
            "datetime_format",
        }
        if unknown:
            raise ConfigError(f"unknown [csv] keys: {sorted(unknown)}")
        if "path" not in csv_doc or "target_column" not in csv_doc:
            raise ConfigError("[csv] needs both path and target_column")
        kwargs["csv"] = CsvSpec(
            path=str(csv_doc["path"]),
            target_column=str(csv_doc["target_column"]),
            datetime_columns=tuple(csv_doc.get("datetime_columns", ())),
            drop_columns=tuple(csv_doc.get("drop_columns", ())),
            datetime_format=csv_doc.get("datetime_format"),
        )
        kwargs["synthetic"] = None
    elif "synthetic" in doc:
        syn_doc = dict(doc["synthetic"])
        defaults = SyntheticSpec()
        unknown = set(syn_doc) - {f.name for f in dataclasses.fields(SyntheticSpec)}
        if unknown:
            raise ConfigError(f"unknown [synthetic] keys: {sorted(unknown)}")
        kwargs["synthetic"] = SyntheticSpec(
            n_rows=syn_doc.get("n_rows", defaults.n_rows),
            n_features=syn_doc.get("n_features", defaults.n_features),
            dominant_feature_weight=float(syn_doc.get("dominant_feature_weight", defaults.dominant_feature_weight)),
            noise_sd=float(syn_doc.get("noise_sd", defaults.noise_sd)),
            secondary_weight_fraction=float(syn_doc.get("secondary_weight_fraction", defaults.secondary_weight_fraction)),
        )
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as handle:
            doc = tomli.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return _from_mapping(doc)


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value != value or abs(value) == float("inf"):
            raise ConfigError("cannot serialize non-finite numbers")
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise ConfigError(f"cannot serialize {value!r}")


def config_to_toml(cfg: ExperimentConfig) -> str:
    none_token = '"none"'
    lines: list[str] = []
    for name in _TOP_LEVEL_KEYS:
        value = getattr(cfg, name)
        lines.append(f"{name} = {_toml_scalar(value) if value is not None else none_token}")
    eps = ", ".join(none_token if e is None else _toml_scalar(float(e)) for e in cfg.epsilons)
    lines.append(f"epsilons = [{eps}]")

    lines.append("")
    lines.append("[tree]")
    depth = cfg.tree.max_depth
    lines.append(f"max_depth = {depth if depth is not None else none_token}")
    lines.append(f"min_samples_split = {cfg.tree.min_samples_split}")
    lines.append(f"min_samples_leaf = {cfg.tree.min_samples_leaf}")

    if cfg.synthetic is not None:
        lines.append("")
        lines.append("[synthetic]")
        for f in dataclasses.fields(SyntheticSpec):
            lines.append(f"{f.name} = {_toml_scalar(getattr(cfg.synthetic, f.name))}")
    if cfg.csv is not None:
        lines.append("")
        lines.append("[csv]")
        lines.append(f"path = {_toml_scalar(cfg.csv.path)}")
        lines.append(f"target_column = {_toml_scalar(cfg.csv.target_column)}")
        if cfg.csv.datetime_columns:
            cols = ", ".join(_toml_scalar(c) for c in cfg.csv.datetime_columns)
            lines.append(f"datetime_columns = [{cols}]")
        if cfg.csv.drop_columns:
            cols = ", ".join(_toml_scalar(c) for c in cfg.csv.drop_columns)
            lines.append(f"drop_columns = [{cols}]")
        if cfg.csv.datetime_format is not None:
            lines.append(f"datetime_format = {_toml_scalar(cfg.csv.datetime_format)}")
    return "\n".join(lines) + "\n"


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(config_to_toml(cfg))
