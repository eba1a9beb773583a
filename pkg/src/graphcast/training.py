"""Adam optimization and the fixed-epoch training loop.

The loop is deliberately minimal: mini-batch MSE with Adam for an exact
number of epochs, no early stopping, no schedules, no weight decay.  The
only optional extras are a seeded training-set shuffle (on by default) and
returning the best-validation-epoch parameters instead of the final ones.
"""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import models as mdl
from . import numcore as nc
from .errors import ConfigError, DimensionError, DivergenceError
from .numcore import ParamSet
from .windowing import SplitDataset, batch, samples_to_arrays


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    ``lr == 0`` is allowed as a null-optimizer diagnostic (parameters stay
    frozen); anything negative is rejected.
    """

    epochs: int = 50
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    window: int = 10
    horizon: int = 1
    seed: int = 0
    shuffle: bool = True
    shuffle_seed: int | None = None
    select_best_val: bool = False
    normalize: bool = True
    target_feature: str = "SalesOrder"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"betas must lie in [0, 1): {self.beta1}, {self.beta2}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))


class AdamState:
    """First/second moment accumulators and the step counter."""

    def __init__(self, params: ParamSet, lr: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}


def adam_step(params: ParamSet, grads: dict, state: AdamState) -> tuple[ParamSet, AdamState]:
    """One Adam update; parameter data and state are updated in place.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
    with the usual 1/(1-b^t) bias corrections.
    """
    state.t += 1
    t = state.t
    for name, tensor in params.items():
        if name not in grads:
            raise DimensionError(f"gradient record is missing parameter {name!r}")
        g = np.asarray(grads[name].data if isinstance(grads[name], nc.Tensor) else grads[name])
        if g.shape != tensor.data.shape:
            raise DimensionError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name!r} shape {tensor.data.shape}"
            )
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[name] / (1.0 - state.beta1**t)
        v_hat = state.v[name] / (1.0 - state.beta2**t)
        tensor.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


@dataclass
class EpochStats:
    train_loss: float
    val_loss: float
    seconds: float


@dataclass
class TrainHistory:
    """Per-epoch mean train loss, validation loss, and wall-clock duration."""

    epochs: list[EpochStats] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def train_losses(self) -> list[float]:
        return [e.train_loss for e in self.epochs]

    @property
    def val_losses(self) -> list[float]:
        return [e.val_loss for e in self.epochs]

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss"]
        for i, e in enumerate(self.epochs, start=1):
            lines.append(f"{i},{e.train_loss:.10g},{e.val_loss:.10g}")
        return "\n".join(lines) + "\n"


def fit_arrays(
    spec: mdl.ModelSpec,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray | None,
    y_val: np.ndarray | None,
    config: TrainConfig,
    adjacency=None,
) -> tuple[ParamSet, TrainHistory]:
    """Train on canonical (n, nodes, features, window) blocks.

    The run is fully determined by (seed, config, data): parameter init,
    shuffle order, and every update replay identically.
    """
    x_shaped = mdl.reshape_for_kind(spec.kind, X_train)
    y_train = np.asarray(y_train, dtype=np.float64).reshape(-1)
    if X_val is not None:
        x_val_shaped = mdl.reshape_for_kind(spec.kind, X_val)
        y_val = np.asarray(y_val, dtype=np.float64).reshape(-1)
    n = x_shaped.shape[0]

    params = mdl.init_params(spec, config.seed)
    state = AdamState(params, lr=config.lr, beta1=config.beta1,
                      beta2=config.beta2, eps=config.eps)
    shuffle_seed = config.shuffle_seed if config.shuffle_seed is not None else config.seed
    rng = np.random.default_rng(shuffle_seed)

    history = TrainHistory()
    best: tuple[float, ParamSet] | None = None
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        index_batches = batch(
            list(range(n)), config.batch_size, rng if config.shuffle else None
        )
        loss_sum = 0.0
        for step, idx in enumerate(index_batches, start=1):
            pred = mdl.forward(spec, params, x_shaped[idx], adjacency)
            loss = nc.mse_loss(pred, y_train[idx])
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(epoch, step, value)
            grads = nc.backward(loss, params)
            adam_step(params, grads, state)
            loss_sum += value * len(idx)
        train_loss = loss_sum / n

        if X_val is not None:
            preds = mdl.forward(spec, params, x_val_shaped, adjacency).data.reshape(-1)
            val_loss = float(np.mean((preds - y_val) ** 2))
            if not np.isfinite(val_loss):
                raise DivergenceError(epoch, 0, val_loss)
            if config.select_best_val and (best is None or val_loss < best[0]):
                best = (val_loss, params.copy())
        else:
            val_loss = float("nan")
        history.epochs.append(
            EpochStats(train_loss, val_loss, time.perf_counter() - started)
        )

    if config.select_best_val and best is not None:
        params = best[1]
    return params, history


def train(
    config: TrainConfig,
    splits: SplitDataset,
    spec: mdl.ModelSpec,
    adjacency=None,
) -> tuple[ParamSet, TrainHistory]:
    """Run the full protocol over a chronological split.

    Exactly ``config.epochs`` epochs of mini-batch MSE Adam updates on the
    train split, validation loss recorded after every epoch, final-epoch
    parameters returned (best-validation selection is opt-in).
    """
    if not splits.train or not splits.validation:
        raise ConfigError("training needs non-empty train and validation splits")
    X_train, y_train = samples_to_arrays(splits.train)
    X_val, y_val = samples_to_arrays(splits.validation)
    return fit_arrays(spec, X_train, y_train, X_val, y_val, config, adjacency)
