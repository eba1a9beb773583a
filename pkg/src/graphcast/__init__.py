"""Demand forecasting over product-relationship graphs.

A self-contained toolkit for single-product demand forecasting on
SupplyGraph-style CSV data: a small reverse-mode autodiff core, three
forecasters (MLP, identity-adjacency GNN, GCN) exposed through an
sklearn-style estimator API, an Adam training loop, and a per-product
MAE/MSE benchmark harness with a CLI.
"""

from .dataset import (
    NormalizationStats,
    NormalizedAdjacency,
    SeriesStats,
    SupplyGraphTopology,
    TemporalTable,
    ZScoreScaler,
    dedup_rows,
    drop_missing,
    filter_low_quality,
    normalize_adjacency,
    parse_edges,
    parse_temporal_csv,
    zscore_fit_apply,
)
from .errors import (
    ConfigError,
    ConflictError,
    ContractError,
    DimensionError,
    DivergenceError,
    EmptyInputError,
    FatalError,
    GraphcastError,
    InsufficientDataError,
    OracleError,
    ParseError,
    SchemaError,
)
from .evaluation import MetricsRow, evaluate, mae, mse, render_table
from .models import (
    GCNForecaster,
    IdentityGNNForecaster,
    MLPForecaster,
    ModelSpec,
    gcn_forward,
    identity_gnn_forward,
    init_params,
    mlp_forward,
)
from .numcore import (
    ParamSet,
    Tensor,
    affine,
    backward,
    finite_diff_check,
    matmul,
    mse_loss,
    relu,
)
from .synthgen import SynthConfig, gen_series, gen_topology, write_dataset
from .training import AdamState, TrainConfig, TrainHistory, adam_step, train
from .windowing import (
    SplitDataset,
    WindowedSample,
    batch,
    chronological_split,
    make_windows,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "ConfigError",
    "ConflictError",
    "ContractError",
    "DimensionError",
    "DivergenceError",
    "EmptyInputError",
    "FatalError",
    "GCNForecaster",
    "GraphcastError",
    "IdentityGNNForecaster",
    "InsufficientDataError",
    "MLPForecaster",
    "MetricsRow",
    "ModelSpec",
    "NormalizationStats",
    "NormalizedAdjacency",
    "OracleError",
    "ParamSet",
    "ParseError",
    "SchemaError",
    "SeriesStats",
    "SplitDataset",
    "SupplyGraphTopology",
    "SynthConfig",
    "TemporalTable",
    "Tensor",
    "TrainConfig",
    "TrainHistory",
    "WindowedSample",
    "ZScoreScaler",
    "adam_step",
    "affine",
    "backward",
    "batch",
    "chronological_split",
    "dedup_rows",
    "drop_missing",
    "evaluate",
    "filter_low_quality",
    "finite_diff_check",
    "gcn_forward",
    "gen_series",
    "gen_topology",
    "identity_gnn_forward",
    "init_params",
    "mae",
    "make_windows",
    "matmul",
    "mlp_forward",
    "mse",
    "mse_loss",
    "normalize_adjacency",
    "parse_edges",
    "parse_temporal_csv",
    "relu",
    "render_table",
    "train",
    "write_dataset",
    "zscore_fit_apply",
]
