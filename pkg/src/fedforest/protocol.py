"""Federated training rounds: local training, server filtering, adoption.

One round has three stages. Every client trains trees on bootstrap resamples
of its local data and submits them. The server scores each submission by R^2
on its own validation split and keeps only trees at or above ``threshold_k``,
rebuilding (or extending) the global forest from the survivors. Each client
then compares the global forest against its own fresh trees on a private
holdout and adopts whichever has the strictly lower MSE, keeping local on a
tie. A round with zero accepted trees is degenerate: the server retains
whatever model it had before.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .data import Dataset, PartitionPlan, load_csv, partition_clients, synth_dataset, train_test_split
from .ensemble import Forest, TreeRecord, bootstrap_sample, forest_mdi, mse_of_model
from .metrics import mse, pearson, r_squared
from .rng import client_stream_seed, make_rng
from .tree import PrivacyParams, TreeParams, fit_tree

__all__ = [
    "ClientState",
    "ServerState",
    "SubmissionOutcome",
    "ClientOutcome",
    "RoundReport",
    "client_train_round",
    "server_filter",
    "server_aggregate",
    "client_adopt",
    "run_round",
    "run_experiment",
    "build_federation",
    "load_dataset",
    "REPEAT_SEED_STRIDE",
]

# repeats re-seed the whole experiment far away from each other so client
# streams (general_seed + client_id) can never collide across repeats
REPEAT_SEED_STRIDE = 1_000_000
# data-handling seeds live in their own band above the client ids
_DATA_SEED_OFFSET = 500_000


@dataclass
class ClientState:
    """One simulated participant: private data, private holdout, own stream."""

    client_id: int
    local_train: Dataset
    local_validation: Dataset
    current_model: Forest | None = None
    rng: np.random.Generator = None  # type: ignore[assignment]


@dataclass
class ServerState:
    """The coordinator: validation data, acceptance bar, global forest."""

    validation: Dataset
    threshold_k: float
    global_model: Forest | None = None
    round_num: int = 0
    epsilon_spent_total: float = 0.0


@dataclass
class SubmissionOutcome:
    client_id: int
    tree_index: int
    validation_score: float

    def to_dict(self) -> dict:
        return {
            "client_id": self.client_id,
            "tree_index": self.tree_index,
            "validation_score": self.validation_score,
        }


@dataclass
class ClientOutcome:
    client_id: int
    local_mse: float
    global_mse: float | None
    adopted_global: bool

    def to_dict(self) -> dict:
        return {
            "client_id": self.client_id,
            "local_mse": self.local_mse,
            "global_mse": self.global_mse,
            "adopted_global": self.adopted_global,
        }


@dataclass
class RoundReport:
    """Everything observable about one completed round."""

    round_num: int
    accepted: list[SubmissionOutcome] = field(default_factory=list)
    rejected: list[SubmissionOutcome] = field(default_factory=list)
    degenerate: bool = False
    global_model_size: int = 0
    global_mse_test: float | None = None
    global_pearson_test: float | None = None
    global_mdi: list[float] | None = None
    per_client: list[ClientOutcome] = field(default_factory=list)
    epsilon_spent_total: float = 0.0

    def to_dict(self) -> dict:
        return {
            "round": self.round_num,
            "accepted": [s.to_dict() for s in self.accepted],
            "rejected": [s.to_dict() for s in self.rejected],
            "degenerate": self.degenerate,
            "global_model_size": self.global_model_size,
            "global_mse_test": self.global_mse_test,
            "global_pearson_test": self.global_pearson_test,
            "global_mdi": self.global_mdi,
            "per_client": [c.to_dict() for c in self.per_client],
            "epsilon_spent_total": self.epsilon_spent_total,
        }


def client_train_round(
    client: ClientState,
    round_num: int,
    params: TreeParams,
    privacy: PrivacyParams,
    trees_per_client: int = 1,
) -> list[TreeRecord]:
    """Stage 1: train fresh trees on bootstrap resamples of the local data.

    Only the client's own stream is consumed, so the outcome is independent
    of the order in which clients are processed.
    """
    if client.local_train.n_rows == 0:
        raise ValueError(f"client {client.client_id} has no training data")
    records = []
    for k in range(trees_per_client):
        bx, by = bootstrap_sample(client.local_train.features, client.local_train.targets, client.rng)
        tree = fit_tree(bx, by, params, privacy, client.rng)
        records.append(TreeRecord(tree, client.client_id, round_num, k))
    return records


def server_filter(submissions, server: ServerState):
    """Stage 2a: score every submission by R^2 on the server validation split.

    Returns (accepted, rejected), both in submission order; a tree is accepted
    iff its score is at least ``threshold_k``. Scores are stored on the
    records.
    """
    if server.validation.n_rows < 2:
        raise ValueError("server validation split needs at least 2 rows")
    accepted: list[TreeRecord] = []
    rejected: list[TreeRecord] = []
    for rec in submissions:
        preds = rec.tree.predict(server.validation.features)
        rec.validation_score = r_squared(preds, server.validation.targets)
        if rec.validation_score >= server.threshold_k:
            accepted.append(rec)
        else:
            rejected.append(rec)
    return accepted, rejected


def server_aggregate(
    accepted,
    server: ServerState,
    strategy: str = "replace",
    max_global_trees: int | None = None,
) -> Forest | None:
    """Stage 2b: rebuild or extend the global forest from accepted trees.

    ``replace`` makes the global forest exactly this round's survivors.
    ``accumulate`` appends them to the previous forest, keeping the newest
    ``max_global_trees`` by (round, client, tree index) when capped. With
    zero accepted trees the previous model is retained untouched.
    """
    if strategy not in ("replace", "accumulate"):
        raise ValueError(f"unknown aggregation strategy {strategy!r}")
    accepted = list(accepted)
    if not accepted:
        return server.global_model
    feature_count = accepted[0].tree.feature_count
    if strategy == "replace" or server.global_model is None:
        server.global_model = Forest(accepted, feature_count)
    else:
        merged = sorted(
            server.global_model.trees + accepted,
            key=lambda r: (r.round_num, r.client_id, r.tree_index),
        )
        if max_global_trees is not None and len(merged) > max_global_trees:
            merged = merged[-max_global_trees:]
        server.global_model = Forest(merged, feature_count)
    return server.global_model


def client_adopt(client: ClientState, global_model: Forest, local_model: Forest):
    """Stage 3: keep whichever model has lower MSE on the client's holdout.

    The comparison is strict: on a tie the local model stays. Returns the
    chosen forest and the outcome record; also updates ``current_model``.
    """
    if len(global_model) == 0 or len(local_model) == 0:
        raise ValueError("adoption needs two non-empty models")
    if client.local_validation.n_rows == 0:
        raise ValueError(f"client {client.client_id} has no validation data")
    vx = client.local_validation.features
    vy = client.local_validation.targets
    global_mse = mse_of_model(global_model, vx, vy)
    local_mse = mse_of_model(local_model, vx, vy)
    adopted = global_mse < local_mse
    client.current_model = global_model if adopted else local_model
    return client.current_model, ClientOutcome(client.client_id, local_mse, global_mse, adopted)


def run_round(
    server: ServerState,
    clients,
    cfg: ExperimentConfig,
    epsilon: float | None,
    test_set: Dataset,
) -> RoundReport:
    """Run one full round and report what happened.

    The test set is only observed, never trained on: the report carries the
    global model's MSE, Pearson correlation, and MDI profile on it (None while
    the server has no model).
    """
    round_num = server.round_num + 1
    privacy = PrivacyParams(epsilon=epsilon, sensitivity=cfg.sensitivity)

    submissions: list[TreeRecord] = []
    local_models: dict[int, Forest] = {}
    for client in clients:
        records = client_train_round(client, round_num, cfg.tree, privacy, cfg.trees_per_client)
        local_models[client.client_id] = Forest(list(records), records[0].tree.feature_count)
        submissions.extend(records)

    accepted, rejected = server_filter(submissions, server)
    server_aggregate(accepted, server, cfg.aggregation, cfg.max_global_trees)
    server.epsilon_spent_total += sum(rec.tree.epsilon_spent for rec in submissions)

    per_client: list[ClientOutcome] = []
    for client in clients:
        local_model = local_models[client.client_id]
        if server.global_model is None:
            client.current_model = local_model
            vx = client.local_validation.features
            vy = client.local_validation.targets
            per_client.append(
                ClientOutcome(client.client_id, mse_of_model(local_model, vx, vy), None, False)
            )
        else:
            _, outcome = client_adopt(client, server.global_model, local_model)
            per_client.append(outcome)

    report = RoundReport(
        round_num=round_num,
        accepted=[SubmissionOutcome(r.client_id, r.tree_index, r.validation_score) for r in accepted],
        rejected=[SubmissionOutcome(r.client_id, r.tree_index, r.validation_score) for r in rejected],
        degenerate=not accepted,
        per_client=per_client,
        epsilon_spent_total=server.epsilon_spent_total,
    )
    if server.global_model is not None:
        preds = server.global_model.predict(test_set.features)
        report.global_model_size = len(server.global_model)
        report.global_mse_test = mse(preds, test_set.targets)
        report.global_pearson_test = pearson(preds, test_set.targets)
        report.global_mdi = [float(v) for v in forest_mdi(server.global_model)]
    server.round_num = round_num
    return report


def load_dataset(cfg: ExperimentConfig, repeat_index: int = 0) -> Dataset:
    """Materialize the configured data source for one repeat."""
    if cfg.csv is not None:
        return load_csv(
            cfg.csv.path,
            cfg.csv.target_column,
            datetime_columns=cfg.csv.datetime_columns,
            drop_columns=cfg.csv.drop_columns,
            datetime_format=cfg.csv.datetime_format,
        )
    syn = cfg.synthetic
    seed = cfg.general_seed + REPEAT_SEED_STRIDE * repeat_index + _DATA_SEED_OFFSET
    return synth_dataset(
        n_rows=syn.n_rows,
        n_features=syn.n_features,
        dominant_feature_weight=syn.dominant_feature_weight,
        noise_sd=syn.noise_sd,
        seed=seed,
        secondary_weight_fraction=syn.secondary_weight_fraction,
    )


def build_federation(cfg: ExperimentConfig, repeat_index: int = 0):
    """Set up (server, clients, test set) exactly as run_experiment would."""
    general = cfg.general_seed + REPEAT_SEED_STRIDE * repeat_index
    dataset = load_dataset(cfg, repeat_index)
    train, test = train_test_split(dataset, cfg.train_fraction, seed=general + _DATA_SEED_OFFSET + 1)
    server_val, report_test = train_test_split(test, 0.5, seed=general + _DATA_SEED_OFFSET + 2)
    chunks = partition_clients(train, PartitionPlan(general, cfg.num_clients, cfg.partition_mode))

    clients: list[ClientState] = []
    for cid, chunk in enumerate(chunks):
        local_train, local_val = train_test_split(
            chunk, 1.0 - cfg.client_holdout_fraction, seed=general + _DATA_SEED_OFFSET + 10 + cid
        )
        clients.append(
            ClientState(
                client_id=cid,
                local_train=local_train,
                local_validation=local_val,
                rng=make_rng(client_stream_seed(general, cid)),
            )
        )
    server = ServerState(validation=server_val, threshold_k=cfg.threshold_k)
    return server, clients, report_test


def run_experiment(
    cfg: ExperimentConfig,
    epsilon: float | None,
    repeat_index: int = 0,
) -> list[RoundReport]:
    """Run one experiment: ``num_rounds`` rounds at a single privacy level.

    With ``plateau_tol`` set, training stops early once the global test MSE
    has improved by less than the tolerance for ``patience`` consecutive
    rounds; rounds without a measurable improvement (no model yet) count as
    stalled.
    """
    cfg.validate()
    server, clients, report_test = build_federation(cfg, repeat_index)

    reports: list[RoundReport] = []
    stalled = 0
    for _ in range(cfg.num_rounds):
        report = run_round(server, clients, cfg, epsilon, report_test)
        reports.append(report)
        if cfg.plateau_tol is not None and len(reports) >= 2:
            prev = reports[-2].global_mse_test
            cur = report.global_mse_test
            if prev is not None and cur is not None and prev - cur >= cfg.plateau_tol:
                stalled = 0
            else:
                stalled += 1
            if stalled >= cfg.patience:
                break
    return reports
