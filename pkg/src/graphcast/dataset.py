"""Ingestion and preprocessing for SupplyGraph-style CSV data.

Temporal files are product-by-date matrices (one file per feature:
SalesOrder, Production, Delivery, FactoryIssue); the edge file lists
undirected product relationships.  Preprocessing mirrors the usual cleanup
chain: drop duplicate rows, drop rows with missing cells, z-score each
series against training-range statistics, and filter products whose series
are mostly zeros.  The graph side builds the raw 0/1 adjacency and its
self-looped symmetric normalization used by the graph-convolution model.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    ConflictError,
    ContractError,
    EmptyInputError,
    ParseError,
    SchemaError,
)

TEMPORAL_FEATURES = ("SalesOrder", "Production", "Delivery", "FactoryIssue")


@dataclass
class TemporalTable:
    """One temporal feature file: products x dates, NaN marks missing cells.

    Parsed tables may still contain duplicate product rows; ``dedup_rows``
    establishes the unique-roster invariant.
    """

    feature_name: str
    products: list[str]
    dates: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.products), len(self.dates)):
            raise ContractError(
                f"value matrix {self.values.shape} does not match "
                f"{len(self.products)} products x {len(self.dates)} dates"
            )

    @property
    def num_products(self) -> int:
        return len(self.products)

    @property
    def num_dates(self) -> int:
        return len(self.dates)


@dataclass
class SupplyGraphTopology:
    """Product roster, undirected edges, and the raw 0/1 adjacency matrix."""

    nodes: list[str]
    edges: dict[tuple[int, int], str]
    adjacency: np.ndarray
    dropped_edge_count: int = 0
    node_metadata: dict[str, dict] = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass
class NormalizedAdjacency:
    """Self-looped, symmetrically normalized propagation matrix.

    Entry (i, j) is ``(A + I)_ij / sqrt(deg_i * deg_j)`` where the degrees
    are taken after the self-loops are added, so every diagonal entry is
    strictly positive and no division by zero can occur.
    """

    matrix: np.ndarray


@dataclass(frozen=True)
class SeriesStats:
    """Z-score statistics for one (product, feature) series."""

    mean: float
    std: float
    constant: bool = False


class NormalizationStats:
    """Per-(product, feature) z-score statistics, fit on training data only."""

    def __init__(self, train_cutoff: int | None = None):
        self.train_cutoff = train_cutoff
        self._entries: dict[tuple[str, str], SeriesStats] = {}

    def set(self, product: str, feature: str, stats: SeriesStats) -> None:
        self._entries[(product, feature)] = stats

    def get(self, product: str, feature: str) -> SeriesStats:
        return self._entries[(product, feature)]

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def to_dict(self) -> dict:
        return {
            "train_cutoff": self.train_cutoff,
            "entries": [
                {
                    "product": product,
                    "feature": feature,
                    "mean": stats.mean,
                    "std": stats.std,
                    "constant": stats.constant,
                }
                for (product, feature), stats in sorted(self._entries.items())
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NormalizationStats":
        stats = cls(train_cutoff=payload.get("train_cutoff"))
        for entry in payload["entries"]:
            stats.set(
                entry["product"],
                entry["feature"],
                SeriesStats(entry["mean"], entry["std"], entry["constant"]),
            )
        return stats


def _parse_date(label: str) -> date | None:
    try:
        return date.fromisoformat(label.strip()[:10])
    except ValueError:
        return None


def parse_temporal_csv(text: str, feature_name: str) -> TemporalTable:
    """Parse one temporal feature CSV into a products x dates table.

    First column holds product codes; every other non-blank header is a
    date label.  Empty cells become NaN (missing); non-numeric cells raise
    with their row/column position.  Blank-header columns are ignored so
    stray trailing columns in real exports do not break ingestion.
    """
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        raise SchemaError(f"{feature_name}: empty file")
    header = rows[0]
    if len(header) < 2:
        raise SchemaError(f"{feature_name}: header needs a product column and dates")
    date_cols = [
        (idx, label.strip())
        for idx, label in enumerate(header[1:], start=1)
        if label.strip()
    ]
    labels = [label for _, label in date_cols]
    if len(set(labels)) != len(labels):
        dupes = sorted({d for d in labels if labels.count(d) > 1})
        raise SchemaError(f"{feature_name}: duplicate date headers {dupes}")
    parsed = [_parse_date(label) for label in labels]
    if all(p is not None for p in parsed):
        for a, b in zip(parsed, parsed[1:]):
            if not a < b:
                raise SchemaError(
                    f"{feature_name}: date columns not strictly increasing near {b}"
                )

    products: list[str] = []
    values = np.full((len(rows) - 1, len(labels)), np.nan)
    for r, row in enumerate(rows[1:], start=2):
        products.append(row[0].strip())
        for c, (idx, _) in enumerate(date_cols):
            cell = row[idx].strip() if idx < len(row) else ""
            if not cell:
                continue
            try:
                values[r - 2, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{feature_name}: non-numeric cell {cell!r} at row {r}, "
                    f"column {idx + 1}"
                ) from None
    return TemporalTable(feature_name, products, labels, values)


def dedup_rows(table: TemporalTable) -> TemporalTable:
    """Collapse exact duplicate product rows, keeping the first occurrence.

    Two rows are duplicates only when both the code and every value
    (missing pattern included) agree; same code with different values is a
    data conflict, not something to merge silently.
    """
    keep_products: list[str] = []
    keep_rows: list[np.ndarray] = []
    first_row: dict[str, np.ndarray] = {}
    conflicts: list[str] = []
    for code, row in zip(table.products, table.values):
        if code not in first_row:
            first_row[code] = row
            keep_products.append(code)
            keep_rows.append(row)
        elif not np.array_equal(first_row[code], row, equal_nan=True):
            conflicts.append(code)
    if conflicts:
        raise ConflictError(
            f"{table.feature_name}: conflicting duplicate rows for "
            f"{sorted(set(conflicts))}"
        )
    values = np.array(keep_rows) if keep_rows else np.empty((0, table.num_dates))
    return TemporalTable(table.feature_name, keep_products, list(table.dates), values)


def drop_missing(table: TemporalTable) -> tuple[TemporalTable, list[str]]:
    """Remove every row containing a missing cell; report the dropped codes."""
    mask = ~np.isnan(table.values).any(axis=1)
    removed = [code for code, ok in zip(table.products, mask) if not ok]
    kept = [code for code, ok in zip(table.products, mask) if ok]
    return (
        TemporalTable(table.feature_name, kept, list(table.dates), table.values[mask]),
        removed,
    )


def zscore_fit_apply(
    series, stats: SeriesStats | None = None
) -> tuple[np.ndarray, SeriesStats]:
    """Standardize a series, fitting mean/std (population) when not supplied.

    A constant series (std exactly 0) maps to all zeros and is flagged, so
    degenerate products flow through the pipeline instead of crashing it.
    """
    values = np.asarray(series, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise EmptyInputError("z-score of an empty series")
    if stats is None:
        mean = float(np.mean(values))
        std = float(np.std(values))
        stats = SeriesStats(mean=mean, std=std, constant=(std == 0.0))
    if stats.constant or stats.std == 0.0:
        return np.zeros_like(values), stats
    return (values - stats.mean) / stats.std, stats


def filter_low_quality(
    table: TemporalTable, zero_fraction_threshold: float = 0.5
) -> tuple[TemporalTable, list[str]]:
    """Drop rows whose fraction of exact-zero cells exceeds the threshold."""
    if not 0.0 <= zero_fraction_threshold <= 1.0:
        raise ContractError(
            f"zero fraction threshold must be in [0, 1], got {zero_fraction_threshold}"
        )
    fractions = np.mean(table.values == 0.0, axis=1)
    mask = fractions <= zero_fraction_threshold
    removed = [code for code, ok in zip(table.products, mask) if not ok]
    kept = [code for code, ok in zip(table.products, mask) if ok]
    return (
        TemporalTable(table.feature_name, kept, list(table.dates), table.values[mask]),
        removed,
    )


def align_tables(
    tables: dict[str, TemporalTable],
) -> tuple[dict[str, TemporalTable], list[str]]:
    """Restrict all feature tables to shared products and shared dates.

    Product order follows the first table's roster; a product must appear
    in every feature file to survive.  Date columns are intersected the
    same way.  Returns the aligned tables plus the removed product codes.
    """
    if not tables:
        raise EmptyInputError("no tables to align")
    names = list(tables)
    first = tables[names[0]]
    shared_products = [
        p for p in first.products if all(p in tables[n].products for n in names)
    ]
    shared_dates = [
        d for d in first.dates if all(d in tables[n].dates for n in names)
    ]
    if not shared_products or not shared_dates:
        raise ContractError("feature files share no products or no dates")
    removed = sorted(
        {p for n in names for p in tables[n].products if p not in shared_products}
    )
    aligned = {}
    for name in names:
        table = tables[name]
        p_idx = [table.products.index(p) for p in shared_products]
        d_idx = [table.dates.index(d) for d in shared_dates]
        aligned[name] = TemporalTable(
            table.feature_name,
            list(shared_products),
            list(shared_dates),
            table.values[np.ix_(p_idx, d_idx)],
        )
    return aligned, removed


def parse_edges(text: str, roster: list[str]) -> SupplyGraphTopology:
    """Parse the edge CSV into an undirected topology over the roster.

    Duplicate edges and both orientations collapse to one undirected edge;
    self-loops and edges touching codes outside the roster are dropped and
    counted.  Extra columns beyond ``node1,node2,relation`` are ignored.
    """
    index = {code: i for i, code in enumerate(roster)}
    adjacency = np.zeros((len(roster), len(roster)))
    edges: dict[tuple[int, int], str] = {}
    dropped = 0
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        if lineno == 1 or not any(cell.strip() for cell in row):
            continue
        if len([c for c in row if c.strip()]) < 2:
            raise ParseError(f"edge file: malformed row at line {lineno}: {row!r}")
        a, b = row[0].strip(), row[1].strip()
        relation = row[2].strip() if len(row) > 2 else ""
        if a not in index or b not in index or a == b:
            dropped += 1
            continue
        i, j = sorted((index[a], index[b]))
        if (i, j) not in edges:
            edges[(i, j)] = relation
            adjacency[i, j] = adjacency[j, i] = 1.0
    return SupplyGraphTopology(list(roster), edges, adjacency, dropped)


def normalize_adjacency(topo: SupplyGraphTopology) -> NormalizedAdjacency:
    """Self-loop the adjacency and normalize it symmetrically by degree."""
    a = np.asarray(topo.adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"adjacency must be square, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise ContractError("adjacency must be symmetric")
    if np.any(np.diagonal(a) != 0.0):
        raise ContractError("adjacency diagonal must be zero before normalization")
    a_tilde = a + np.eye(a.shape[0])
    inv_sqrt_deg = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    matrix = a_tilde * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]
    return NormalizedAdjacency(matrix)


class ZScoreScaler(BaseEstimator, TransformerMixin):
    """Column-wise z-score transformer with constant-column handling.

    Columns are time series; fit on the training time block only, then
    transform the full range.  Constant columns transform to zeros instead
    of dividing by zero, matching ``zscore_fit_apply``.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyInputError(f"cannot fit scaler on shape {X.shape}")
        stats = [zscore_fit_apply(X[:, j])[1] for j in range(X.shape[1])]
        self.mean_ = np.array([s.mean for s in stats])
        self.std_ = np.array([s.std for s in stats])
        self.constant_ = np.array([s.constant for s in stats])
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        safe_std = np.where(self.constant_, 1.0, self.std_)
        out = (X - self.mean_) / safe_std
        out[:, self.constant_] = 0.0
        return out

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X * np.where(self.constant_, 0.0, self.std_) + self.mean_

    def column_stats(self, j: int) -> SeriesStats:
        return SeriesStats(
            mean=float(self.mean_[j]),
            std=float(self.std_[j]),
            constant=bool(self.constant_[j]),
        )


def write_temporal_csv(table: TemporalTable, precision: int = 12) -> str:
    """Serialize a table back to the on-disk schema.

    12 significant digits round-trip within 1e-9; pass 17 for an exact
    float64 round trip (used by the preprocessed store).
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["Product", *table.dates])
    for code, row in zip(table.products, table.values):
        cells = ["" if math.isnan(v) else f"{v:.{precision}g}" for v in row]
        writer.writerow([code, *cells])
    return out.getvalue()


def write_edges_csv(topo: SupplyGraphTopology) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["node1", "node2", "relation"])
    for (i, j), relation in sorted(topo.edges.items()):
        writer.writerow([topo.nodes[i], topo.nodes[j], relation])
    return out.getvalue()
