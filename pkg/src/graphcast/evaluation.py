"""Test-split metrics and the per-product benchmark table.

MAE is the mean absolute error, MSE the mean squared error, both over the
test predictions.  The table keeps the four-column layout
(Product, Model, MSE, MAE) and appends the metric space so normalized and
raw-unit numbers can never be confused for each other.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .dataset import SeriesStats
from .errors import ConfigError, ContractError, DimensionError, EmptyInputError
from .models import ModelSpec, predict
from .numcore import ParamSet
from .windowing import WindowedSample, samples_to_arrays

MODEL_COLUMN_ORDER = ("MLP", "GNN", "GCN")
METRIC_SPACES = ("normalized", "raw-units")


@dataclass
class MetricsRow:
    """One (product, model) result; ``error`` marks a failed training run."""

    product: str
    model: str
    mse: float
    mae: float
    space: str = "normalized"
    error: str | None = None


MetricsReport = list[MetricsRow]


def _check_pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    yhat = np.asarray(yhat, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise EmptyInputError("metric over zero elements")
    if y.size != yhat.size:
        raise DimensionError(f"length mismatch: {y.size} actual vs {yhat.size} predicted")
    return y, yhat


def mae(y, yhat) -> float:
    """Mean absolute error: average magnitude of the prediction errors."""
    y, yhat = _check_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def mse(y, yhat) -> float:
    """Mean squared error: average of the squared prediction errors."""
    y, yhat = _check_pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def evaluate(
    params: ParamSet,
    spec: ModelSpec,
    test_samples: list[WindowedSample],
    product: str,
    stats: SeriesStats | None = None,
    space: str = "normalized",
    adjacency=None,
) -> MetricsRow:
    """Score trained parameters on the test split.

    In ``raw-units`` space both targets and predictions are de-normalized
    with the training-set statistics of the focal series before the
    metrics are taken; that requires ``stats``.
    """
    if space not in METRIC_SPACES:
        raise ConfigError(f"metric space must be one of {METRIC_SPACES}, got {space!r}")
    X, y = samples_to_arrays(test_samples)
    yhat = predict(spec, params, X, adjacency)
    if space == "raw-units":
        if stats is None:
            raise ConfigError("raw-units metrics need the focal series statistics")
        y = y * stats.std + stats.mean
        yhat = yhat * stats.std + stats.mean
    return MetricsRow(product, spec.model_name, mse(y, yhat), mae(y, yhat), space)


def _ordered(rows: MetricsReport) -> MetricsReport:
    product_order: dict[str, int] = {}
    for row in rows:
        product_order.setdefault(row.product, len(product_order))
    model_rank = {name: i for i, name in enumerate(MODEL_COLUMN_ORDER)}
    return sorted(
        rows,
        key=lambda r: (product_order[r.product], model_rank.get(r.model, len(model_rank))),
    )


def _check_rows(rows: MetricsReport) -> None:
    for row in rows:
        if row.error is not None:
            continue
        if row.mse < 0 or row.mae < 0:
            raise ContractError(f"negative metric in row {row}")
        if row.mae > math.sqrt(row.mse) + 1e-12:
            raise ContractError(
                f"MAE {row.mae} exceeds sqrt(MSE) {math.sqrt(row.mse)} "
                f"for {row.product}/{row.model}"
            )


def _fmt(value: float) -> str:
    return "NA" if not math.isfinite(value) else f"{value:.4f}"


def render_table(rows: MetricsReport, fmt: str = "csv") -> str:
    """Render the benchmark table; rows are ordered by product then model.

    Metrics print with four decimals; failed rows render their metrics as
    ``NA``.  The MAE <= sqrt(MSE) invariant is checked on every rendered
    row.
    """
    _check_rows(rows)
    rows = _ordered(rows)
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["Product", "Model", "MSE", "MAE", "Space"])
        for row in rows:
            writer.writerow([row.product, row.model, _fmt(row.mse), _fmt(row.mae), row.space])
        return out.getvalue()
    if fmt == "markdown":
        lines = [
            "| Product | Model | MSE | MAE | Space |",
            "| --- | --- | --- | --- | --- |",
        ]
        for row in rows:
            lines.append(
                f"| {row.product} | {row.model} | {_fmt(row.mse)} | "
                f"{_fmt(row.mae)} | {row.space} |"
            )
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown table format {fmt!r}; expected csv or markdown")


def parse_report_csv(text: str) -> MetricsReport:
    """Read a rendered CSV report back into rows (NA becomes NaN)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[:4] != ["Product", "Model", "MSE", "MAE"]:
        raise ContractError(f"unexpected report header: {header}")
    rows: MetricsReport = []
    for record in reader:
        if not record:
            continue
        mse_v = float("nan") if record[2] == "NA" else float(record[2])
        mae_v = float("nan") if record[3] == "NA" else float(record[3])
        space = record[4] if len(record) > 4 else "normalized"
        rows.append(MetricsRow(record[0], record[1], mse_v, mae_v, space))
    return rows
