"""Federated regression-tree learning with differentially private splits.

The pieces compose bottom-up: ``tree`` grows single trees whose split choice
can be privatized with the exponential mechanism, ``ensemble`` bags them into
forests, ``protocol`` runs federated rounds with server-side quality
filtering and client-side adoption, and ``cli`` drives seeded experiment
grids into CSV/JSON reports.
"""

from .config import ConfigError, CsvSpec, ExperimentConfig, SyntheticSpec, load_config, save_config
from .data import (
    DataError,
    Dataset,
    PartitionPlan,
    load_csv,
    partition_clients,
    save_csv,
    synth_dataset,
    train_test_split,
)
from .ensemble import (
    EmptyModelError,
    Forest,
    TreeRecord,
    bootstrap_sample,
    forest_mdi,
    mse_of_model,
    predict_forest,
)
from .metrics import MetricReport, mdi_entropy, metric_report, mse, pearson, r_squared
from .protocol import (
    ClientState,
    RoundReport,
    ServerState,
    client_adopt,
    client_train_round,
    run_experiment,
    run_round,
    server_aggregate,
    server_filter,
)
from .rng import client_stream_seed, make_rng
from .tree import (
    InvalidSplitError,
    PrivacyParams,
    RegressionTree,
    SplitCandidate,
    TreeParams,
    best_split_with_dp,
    enumerate_candidates,
    exponential_weights,
    fit_tree,
    information_gain,
    node_impurity,
    roulette_wheel_select,
    tree_mdi,
)

__version__ = "0.1.0"
