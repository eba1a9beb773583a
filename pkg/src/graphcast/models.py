"""The three forecasters: MLP, identity-adjacency GNN, and GCN.

All of them regress a single product's next demand value from a windowed
block of every product's temporal features; they differ only in how that
block is plumbed through the network:

* ``MLP`` flattens the block and runs a fully connected ReLU stack.
* ``IdentityGNN`` treats the (channels x window) block as node features,
  multiplies by an identity adjacency per batch item (a self-loop-only
  aggregation that leaves the features untouched), flattens, and runs the
  same fully connected stack.  It is the MLP in graph clothing.
* ``GCN`` propagates node features through degree-normalized adjacency
  layers and reads the focal product's embedding through a linear head.

Heads are linear: no activation on the final output.

The functional layer (``init_params`` / ``*_forward`` / ``predict``) works
on ``numcore`` graphs; the estimator classes at the bottom wrap it in the
familiar fit/predict surface.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import numcore as nc
from .dataset import NormalizedAdjacency
from .errors import ConfigError, ContractError, DimensionError
from .numcore import ParamSet, Tensor

MODEL_KINDS = ("MLP", "IdentityGNN", "GCN")
MODEL_NAMES = {"MLP": "MLP", "IdentityGNN": "GNN", "GCN": "GCN"}


@dataclass(frozen=True)
class ModelSpec:
    """Architecture and input layout for one forecaster.

    ``nodes``/``features``/``window`` describe the input block; ``focal``
    is the index of the product whose demand is being predicted (used by
    the GCN head; the fully connected models see every product anyway).
    """

    kind: str
    hidden: tuple[int, ...]
    nodes: int
    features: int
    window: int
    focal: int = 0
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected {MODEL_KINDS}")
        if self.activation != "relu":
            raise ConfigError(f"only relu activation is supported, got {self.activation!r}")
        hidden = tuple(int(h) for h in self.hidden)
        object.__setattr__(self, "hidden", hidden)
        if len(hidden) < 1 or any(h < 1 for h in hidden):
            raise ConfigError(f"need at least one positive hidden width, got {hidden}")
        if min(self.nodes, self.features, self.window) < 1:
            raise ConfigError(
                f"layout dims must be positive: nodes={self.nodes}, "
                f"features={self.features}, window={self.window}"
            )
        if not 0 <= self.focal < self.nodes:
            raise ConfigError(f"focal index {self.focal} out of range for {self.nodes} nodes")

    @property
    def model_name(self) -> str:
        return MODEL_NAMES[self.kind]

    @property
    def flat_width(self) -> int:
        return self.nodes * self.features * self.window

    @property
    def node_width(self) -> int:
        """Per-node input width seen by a GCN layer (features * window)."""
        return self.features * self.window

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hidden": list(self.hidden),
            "nodes": self.nodes,
            "features": self.features,
            "window": self.window,
            "focal": self.focal,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelSpec":
        return cls(
            kind=payload["kind"],
            hidden=tuple(payload["hidden"]),
            nodes=payload["nodes"],
            features=payload["features"],
            window=payload["window"],
            focal=payload.get("focal", 0),
            activation=payload.get("activation", "relu"),
        )


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int,
            shape: tuple[int, ...]) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_params(spec: ModelSpec, seed: int) -> ParamSet:
    """Seeded Glorot-uniform weights and zero biases for a model spec.

    Weight entries are drawn uniformly from
    ``+/- sqrt(6 / (fan_in + fan_out))``; the draw order is fixed per
    layer, so the same seed always yields bit-identical parameters.
    """
    rng = np.random.default_rng(seed)
    items: list[tuple[str, np.ndarray]] = []
    if spec.kind in ("MLP", "IdentityGNN"):
        widths = [spec.flat_width, *spec.hidden, 1]
        for layer, (d_in, d_out) in enumerate(zip(widths, widths[1:]), start=1):
            items.append((f"fc{layer}_w", _glorot(rng, d_out, d_in, (d_out, d_in))))
            items.append((f"fc{layer}_b", np.zeros(d_out)))
    else:
        widths = [spec.node_width, *spec.hidden]
        for layer, (d_in, d_out) in enumerate(zip(widths, widths[1:]), start=1):
            items.append((f"conv{layer}_w", _glorot(rng, d_out, d_in, (d_in, d_out))))
        head_in = spec.hidden[-1]
        items.append(("head_w", _glorot(rng, 1, head_in, (1, head_in))))
        items.append(("head_b", np.zeros(1)))
    return ParamSet(items)


def _fc_stack(params: ParamSet, x: Tensor) -> Tensor:
    """Alternating affine+ReLU hidden layers, then a linear output layer."""
    depth = sum(1 for name in params.names() if name.endswith("_w") and name.startswith("fc"))
    h = x
    for layer in range(1, depth + 1):
        h = nc.affine(h, params[f"fc{layer}_w"], params[f"fc{layer}_b"])
        if layer < depth:
            h = nc.relu(h)
    return h


def mlp_forward(params: ParamSet, x) -> Tensor:
    """Fully connected forward pass over a (batch, width) input."""
    x = nc.as_tensor(x)
    if x.data.ndim != 2:
        raise DimensionError(f"mlp input must be (batch, width), got {x.shape}")
    return _fc_stack(params, x)


def identity_gnn_forward(params: ParamSet, x, adjacency: np.ndarray | None = None) -> Tensor:
    """Self-loop aggregation then the fully connected stack.

    ``x`` is (batch, rows, cols).  Each batch item is left-multiplied by
    the adjacency (identity when omitted, making the aggregation an exact
    no-op), flattened row-major, and pushed through the same stack as
    ``mlp_forward``; the identity matrix is reused logically across the
    batch rather than materialized per item.
    """
    data = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if data.ndim != 3:
        raise DimensionError(f"gnn input must be (batch, rows, cols), got {data.shape}")
    batch, rows, _ = data.shape
    if adjacency is None:
        aggregated = data
    else:
        adjacency = np.asarray(adjacency, dtype=np.float64)
        if adjacency.shape != (rows, rows):
            raise DimensionError(
                f"adjacency {adjacency.shape} does not match {rows} node rows"
            )
        aggregated = np.stack([adjacency @ data[i] for i in range(batch)])
    return _fc_stack(params, nc.as_tensor(aggregated.reshape(batch, -1)))


def _gcn_propagation(matrix) -> np.ndarray:
    if isinstance(matrix, NormalizedAdjacency):
        return matrix.matrix
    return np.asarray(matrix, dtype=np.float64)


def gcn_forward(params: ParamSet, norm_adj, x, focal: int) -> Tensor:
    """Graph-convolution forward pass for one sample; returns a scalar.

    Each layer computes ``relu(prop @ h @ w)`` where ``prop`` is the
    self-looped, symmetrically degree-normalized adjacency; the focal
    node's final embedding goes through one linear affine head.
    """
    prop = _gcn_propagation(norm_adj)
    x = nc.as_tensor(x)
    if x.data.ndim != 2:
        raise DimensionError(f"gcn input must be (nodes, width), got {x.shape}")
    if prop.shape[0] != x.shape[0]:
        raise DimensionError(
            f"node count mismatch: adjacency {prop.shape} vs features {x.shape}"
        )
    depth = sum(1 for name in params.names() if name.startswith("conv"))
    h = x
    for layer in range(1, depth + 1):
        h = nc.relu(nc.matmul(nc.matmul(prop, h), params[f"conv{layer}_w"]))
    out = nc.affine(nc.select_row(h, focal), params["head_w"], params["head_b"])
    return nc.reshape(out, ())


def gcn_forward_batch(params: ParamSet, norm_adj, x, focal: int) -> Tensor:
    """Run ``gcn_forward`` per batch item and stack into a (batch,) tensor."""
    data = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if data.ndim != 3:
        raise DimensionError(f"gcn batch input must be (batch, nodes, width), got {data.shape}")
    return nc.stack([gcn_forward(params, norm_adj, data[i], focal) for i in range(data.shape[0])])


def reshape_for_kind(kind: str, windows: np.ndarray) -> np.ndarray:
    """Reshape canonical (n, nodes, features, window) blocks per model kind.

    MLP gets flat rows; IdentityGNN gets (channels, window) node blocks
    where a channel is one (product, feature) pair; GCN gets per-product
    rows carrying all features across the window.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 4:
        raise DimensionError(
            f"expected (n, nodes, features, window) blocks, got {windows.shape}"
        )
    n, nodes, features, window = windows.shape
    if kind == "MLP":
        return windows.reshape(n, nodes * features * window)
    if kind == "IdentityGNN":
        return windows.reshape(n, nodes * features, window)
    if kind == "GCN":
        return windows.reshape(n, nodes, features * window)
    raise ConfigError(f"unknown model kind {kind!r}")


def forward(spec: ModelSpec, params: ParamSet, x, adjacency=None) -> Tensor:
    """Dispatch a batch forward pass for any model kind."""
    if spec.kind == "MLP":
        return mlp_forward(params, x)
    if spec.kind == "IdentityGNN":
        return identity_gnn_forward(params, x)
    if adjacency is None:
        raise ConfigError("GCN forward requires the normalized adjacency")
    return gcn_forward_batch(params, adjacency, x, spec.focal)


def predict(spec: ModelSpec, params: ParamSet, windows: np.ndarray, adjacency=None) -> np.ndarray:
    """Predictions over canonical window blocks as a flat (n,) array."""
    shaped = reshape_for_kind(spec.kind, windows)
    return forward(spec, params, shaped, adjacency).data.reshape(-1)


def save_params(params: ParamSet, base_path) -> None:
    """Persist parameters as flat little-endian float64 plus a shape manifest.

    ``base_path`` of ``.../params`` produces ``params.bin`` and
    ``params.manifest.txt`` (one ``name dim dim ...`` line per tensor, in
    parameter order).
    """
    base = Path(base_path)
    blob = b"".join(t.data.astype("<f8").tobytes() for _, t in params.items())
    base.with_suffix(".bin").write_bytes(blob)
    lines = [" ".join([name, *map(str, t.shape)]) for name, t in params.items()]
    base.with_suffix(".manifest.txt").write_text("\n".join(lines) + "\n")


def load_params(base_path) -> ParamSet:
    base = Path(base_path)
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f8")
    items = []
    offset = 0
    for line in base.with_suffix(".manifest.txt").read_text().splitlines():
        if not line.strip():
            continue
        name, *dims = line.split()
        shape = tuple(int(d) for d in dims)
        size = int(np.prod(shape)) if shape else 1
        items.append((name, raw[offset : offset + size].reshape(shape).copy()))
        offset += size
    if offset != raw.size:
        raise ContractError(
            f"parameter blob holds {raw.size} values but manifest describes {offset}"
        )
    return ParamSet(items)


def _as_window_blocks(X) -> np.ndarray:
    """Validate estimator input as (n, nodes, features, window) float blocks."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None, None]
    if X.ndim != 4:
        raise DimensionError(
            f"estimator input must be (n, nodes, features, window), got {X.shape}"
        )
    if X.shape[0] == 0:
        raise DimensionError("estimator input has zero samples")
    if not np.all(np.isfinite(X)):
        raise ContractError("estimator input contains non-finite values")
    return X


class _ForecasterBase(BaseEstimator, RegressorMixin):
    """Shared fit/predict mechanics for the three forecasters."""

    _kind = ""

    def _adjacency_matrix(self):
        return None

    def _make_spec(self, X: np.ndarray) -> ModelSpec:
        _, nodes, features, window = X.shape
        return ModelSpec(
            kind=self._kind,
            hidden=tuple(self.hidden),
            nodes=nodes,
            features=features,
            window=window,
            focal=getattr(self, "focal", 0),
        )

    def fit(self, X, y, X_val=None, y_val=None):
        from .training import TrainConfig, fit_arrays

        X = _as_window_blocks(X)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.size != X.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} samples but y has {y.size}")
        if X_val is not None:
            X_val = _as_window_blocks(X_val)
            y_val = np.asarray(y_val, dtype=np.float64).reshape(-1)
        self.spec_ = self._make_spec(X)
        config = TrainConfig(
            epochs=self.epochs,
            lr=self.lr,
            batch_size=self.batch_size,
            seed=self.seed,
            shuffle=self.shuffle,
            select_best_val=self.select_best_val,
            window=X.shape[3],
        )
        self.params_, self.history_ = fit_arrays(
            self.spec_, X, y, X_val, y_val, config,
            adjacency=self._adjacency_matrix(),
        )
        self.n_features_in_ = self.spec_.flat_width
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = _as_window_blocks(X)
        expected = (self.spec_.nodes, self.spec_.features, self.spec_.window)
        if X.shape[1:] != expected:
            raise DimensionError(
                f"fitted on blocks of shape {expected}, got {X.shape[1:]}"
            )
        return predict(self.spec_, self.params_, X, self._adjacency_matrix())


class MLPForecaster(_ForecasterBase):
    """Fully connected regressor over flattened window blocks."""

    _kind = "MLP"

    def __init__(self, hidden=(64, 64), epochs=50, lr=0.001, batch_size=16,
                 seed=0, shuffle=True, select_best_val=False):
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.shuffle = shuffle
        self.select_best_val = select_best_val


class IdentityGNNForecaster(_ForecasterBase):
    """Self-loop graph aggregation (an exact no-op) plus the MLP stack."""

    _kind = "IdentityGNN"

    def __init__(self, hidden=(64, 64), epochs=50, lr=0.001, batch_size=16,
                 seed=0, shuffle=True, select_best_val=False):
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.shuffle = shuffle
        self.select_best_val = select_best_val


class GCNForecaster(_ForecasterBase):
    """Degree-normalized graph convolutions with a focal-node linear head."""

    _kind = "GCN"

    def __init__(self, adjacency=None, focal=0, hidden=(32, 32), epochs=50,
                 lr=0.001, batch_size=16, seed=0, shuffle=True,
                 select_best_val=False):
        self.adjacency = adjacency
        self.focal = focal
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.shuffle = shuffle
        self.select_best_val = select_best_val

    def _adjacency_matrix(self):
        if self.adjacency is None:
            raise ConfigError("GCNForecaster needs a normalized adjacency matrix")
        return _gcn_propagation(self.adjacency)
