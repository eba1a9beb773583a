"""Sliding-window sample construction and chronological splitting."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, InsufficientDataError


@dataclass(frozen=True)
class WindowedSample:
    """One supervised example: a history block and a single future target.

    ``t_index`` is the last time step visible in the input; the target is
    the focal series ``horizon`` steps later.  ``inputs`` has shape
    (nodes, features, window) and only covers times
    ``[t_index - window + 1, t_index]``.
    """

    t_index: int
    inputs: np.ndarray
    target: float


@dataclass
class SplitDataset:
    """Chronologically ordered train / validation / test sample lists."""

    train: list[WindowedSample] = field(default_factory=list)
    validation: list[WindowedSample] = field(default_factory=list)
    test: list[WindowedSample] = field(default_factory=list)


def window_count(num_times: int, window: int, horizon: int) -> int:
    return num_times - window - horizon + 1


def make_windows(
    features: np.ndarray,
    target_series: np.ndarray,
    window: int,
    horizon: int = 1,
) -> list[WindowedSample]:
    """Slide a fixed-length window over time and pair it with future targets.

    ``features`` is (nodes, features, T); ``target_series`` is length T.
    Produces ``T - window - horizon + 1`` samples with consecutive anchors;
    inputs never include any time at or beyond the target.
    """
    features = np.asarray(features, dtype=np.float64)
    target_series = np.asarray(target_series, dtype=np.float64).reshape(-1)
    if features.ndim != 3:
        raise DimensionError(
            f"features must be (nodes, features, T), got shape {features.shape}"
        )
    num_times = features.shape[2]
    if target_series.size != num_times:
        raise DimensionError(
            f"target length {target_series.size} does not match T={num_times}"
        )
    if window < 1 or horizon < 1:
        raise ConfigError(f"window and horizon must be >= 1, got {window}, {horizon}")
    if window_count(num_times, window, horizon) < 1:
        raise InsufficientDataError(
            f"need at least {window + horizon} time points for window={window}, "
            f"horizon={horizon}; got {num_times}"
        )
    samples = []
    for t in range(window - 1, num_times - horizon):
        block = features[:, :, t - window + 1 : t + 1]
        samples.append(
            WindowedSample(t_index=t, inputs=block, target=float(target_series[t + horizon]))
        )
    return samples


def chronological_split(
    samples: list[WindowedSample],
    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1),
) -> SplitDataset:
    """Cut time-ordered samples into contiguous train/validation/test blocks.

    Train takes ``floor(r_train * n)`` samples, validation
    ``floor(r_val * n)``, test the remainder.  Any empty split is a
    configuration error.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) <= 0:
        raise ConfigError(f"split ratios must be three positive values summing to 1, got {ratios}")
    n = len(samples)
    n_train = int(np.floor(ratios[0] * n))
    n_val = int(np.floor(ratios[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ConfigError(
            f"split of {n} samples yields empty subset ({n_train}/{n_val}/{n_test})"
        )
    return SplitDataset(
        train=list(samples[:n_train]),
        validation=list(samples[n_train : n_train + n_val]),
        test=list(samples[n_train + n_val :]),
    )


def train_time_cutoff(num_times: int, window: int, horizon: int,
                      train_ratio: float = 0.7) -> int:
    """Exclusive end of the time range the training split can observe.

    Used to fit normalization statistics on training data only: the last
    training sample's target sits at ``anchor + horizon``, so everything
    up to and including that index is fair game.
    """
    n = window_count(num_times, window, horizon)
    if n < 1:
        raise InsufficientDataError(
            f"need at least {window + horizon} time points, got {num_times}"
        )
    n_train = int(np.floor(train_ratio * n))
    if n_train < 1:
        raise ConfigError(f"train split empty for {n} samples at ratio {train_ratio}")
    last_anchor = (window - 1) + n_train - 1
    return last_anchor + horizon + 1


def batch(samples: list, batch_size: int, rng: np.random.Generator | None = None) -> list[list]:
    """Chunk a sample list into contiguous batches; the last may be short.

    Order is preserved unless a generator is passed, in which case a seeded
    shuffle is applied first (training only; evaluation never shuffles).
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    items = list(samples)
    if rng is not None:
        order = rng.permutation(len(items))
        items = [items[i] for i in order]
    return [items[i : i + batch_size] for i in range(0, len(items), batch_size)]


def samples_to_arrays(samples: list[WindowedSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into (n, nodes, features, window) inputs and (n,) targets."""
    if not samples:
        raise ConfigError("empty sample list")
    inputs = np.stack([s.inputs for s in samples]).astype(np.float64)
    targets = np.array([s.target for s in samples], dtype=np.float64)
    return inputs, targets
