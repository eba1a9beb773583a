"""Command-line pipeline: ingest, preprocess, train, evaluate, benchmark.

Subcommands mirror the pipeline stages.  ``benchmark`` is the umbrella:
it builds (or reuses) the preprocessed store, trains every surviving
product x model combination under the fixed protocol, and writes
``report.csv`` / ``report.md`` plus a run manifest that pins every input
needed to reproduce the report byte for byte.

Config precedence: built-in defaults < ``--config`` JSON file < explicit
CLI flags.  ``GRAPHCAST_DATA_DIR`` supplies the default data root.
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dataset import (
    NormalizationStats,
    NormalizedAdjacency,
    TEMPORAL_FEATURES,
    TemporalTable,
    ZScoreScaler,
    align_tables,
    dedup_rows,
    drop_missing,
    filter_low_quality,
    normalize_adjacency,
    parse_edges,
    parse_temporal_csv,
    write_edges_csv,
    write_temporal_csv,
    zscore_fit_apply,
)
from .errors import ConfigError, FatalError, GraphcastError
from .evaluation import MetricsRow, evaluate, parse_report_csv, render_table
from .models import MODEL_KINDS, ModelSpec, load_params, save_params
from .synthgen import PROCESS_KINDS, SynthConfig, write_dataset
from .training import TrainConfig, train
from .windowing import (
    SplitDataset,
    chronological_split,
    make_windows,
    train_time_cutoff,
)

ENV_DATA_DIR = "GRAPHCAST_DATA_DIR"
KIND_BY_FLAG = {"mlp": "MLP", "gnn": "IdentityGNN", "gcn": "GCN"}
KIND_TO_FLAG = {v: k for k, v in KIND_BY_FLAG.items()}
EXIT_OK = 0
EXIT_FATAL = 1
EXIT_FAILED_ROWS = 3


@dataclass
class RunConfig:
    """Resolved pipeline configuration shared by preprocess/train/benchmark."""

    window_size: int = 10
    horizon: int = 1
    batch_size: int = 16
    epochs: int = 50
    lr: float = 0.001
    seed: int = 0
    shuffle: bool = True
    shuffle_seed: int | None = None
    select_best_val: bool = False
    random_split: bool = False
    zero_fraction_threshold: float = 0.5
    target_feature: str = "SalesOrder"
    space: str = "normalized"
    hidden_fc: tuple = (64, 64)
    hidden_gcn: tuple = (32, 32)

    def __post_init__(self):
        self.hidden_fc = tuple(int(h) for h in self.hidden_fc)
        self.hidden_gcn = tuple(int(h) for h in self.hidden_gcn)
        if self.target_feature not in TEMPORAL_FEATURES:
            raise ConfigError(
                f"target feature must be one of {TEMPORAL_FEATURES}, got {self.target_feature!r}"
            )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden_fc"] = list(self.hidden_fc)
        out["hidden_gcn"] = list(self.hidden_gcn)
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            lr=self.lr,
            batch_size=self.batch_size,
            window=self.window_size,
            horizon=self.horizon,
            seed=seed,
            shuffle=self.shuffle,
            shuffle_seed=self.shuffle_seed,
            select_best_val=self.select_best_val,
            target_feature=self.target_feature,
        )


@dataclass
class PreprocessedStore:
    """Cleaned tables, normalization stats, and graph matrices in memory."""

    roster: list[str]
    dates: list[str]
    tables: dict[str, TemporalTable]
    normalized: dict[str, np.ndarray]
    stats: NormalizationStats
    topology: object
    norm_adj: NormalizedAdjacency
    removals: dict
    config: RunConfig

    def product_index(self, code: str) -> int:
        try:
            return self.roster.index(code)
        except ValueError:
            raise FatalError(f"product {code!r} is not in the preprocessed roster") from None

    def feature_tensor(self) -> np.ndarray:
        """Normalized (nodes, features, T) block in canonical feature order."""
        return np.stack([self.normalized[f] for f in TEMPORAL_FEATURES], axis=1)


def _normalized_name(path: Path) -> str:
    return path.name.lower().replace(" ", "").replace("_", "").replace("-", "")


def locate_inputs(data_dir: Path) -> dict[str, Path]:
    """Find the four temporal CSVs and the edge CSV under a data directory.

    Matching is case/space/underscore-insensitive so both ``SalesOrder.csv``
    and ``Sales Order.csv`` work.  Any CSV whose name contains ``edge``
    serves as the edge list.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise FatalError(f"data directory not found: {data_dir}")
    candidates = sorted(data_dir.rglob("*.csv"))
    found: dict[str, Path] = {}
    for feature in TEMPORAL_FEATURES:
        want = f"{feature.lower()}.csv"
        for path in candidates:
            if _normalized_name(path) == want:
                found[feature] = path
                break
        else:
            raise FatalError(
                f"missing temporal file for {feature}: expected '{feature}.csv' "
                f"(or a spaced variant) under {data_dir}"
            )
    for path in candidates:
        if "edge" in _normalized_name(path):
            found["edges"] = path
            break
    else:
        raise FatalError(f"missing edge file: expected 'edges.csv' under {data_dir}")
    for path in candidates:
        name = _normalized_name(path)
        if "edge" not in name and ("node" in name or "classes" in name):
            found["nodes"] = path
            break
    return found


def _parse_node_metadata(text: str, roster: list[str]) -> dict[str, dict]:
    """Optional node attribute file: first column product, rest kept verbatim.

    Categories and groupings ride along as metadata; no model consumes them.
    """
    import csv as _csv
    import io as _io

    reader = _csv.reader(_io.StringIO(text))
    header = next(reader, None)
    if not header or len(header) < 2:
        return {}
    keys = [h.strip() for h in header[1:]]
    known = set(roster)
    out: dict[str, dict] = {}
    for row in reader:
        if not row or row[0].strip() not in known:
            continue
        out[row[0].strip()] = {
            k: row[i + 1].strip() if i + 1 < len(row) else ""
            for i, k in enumerate(keys)
        }
    return out


def preprocess(data_dir, config: RunConfig) -> PreprocessedStore:
    """Run the full cleanup chain and compute graph matrices and stats."""
    paths = locate_inputs(Path(data_dir))
    removals: dict = {
        "deduplicated": {},
        "missing_values": {},
        "not_in_all_files": [],
        "low_quality": {},
        "dropped_edges": 0,
    }
    tables: dict[str, TemporalTable] = {}
    for feature in TEMPORAL_FEATURES:
        table = parse_temporal_csv(paths[feature].read_text(), feature)
        deduped = dedup_rows(table)
        removals["deduplicated"][feature] = table.num_products - deduped.num_products
        cleaned, dropped = drop_missing(deduped)
        removals["missing_values"][feature] = dropped
        tables[feature] = cleaned

    tables, not_shared = align_tables(tables)
    removals["not_in_all_files"] = not_shared

    low_quality: set[str] = set()
    for feature, table in tables.items():
        _, dropped = filter_low_quality(table, config.zero_fraction_threshold)
        removals["low_quality"][feature] = dropped
        low_quality.update(dropped)
    roster = [p for p in tables[TEMPORAL_FEATURES[0]].products if p not in low_quality]
    if not roster:
        raise FatalError("no products survived preprocessing")
    for feature in TEMPORAL_FEATURES:
        table = tables[feature]
        idx = [table.products.index(p) for p in roster]
        tables[feature] = TemporalTable(
            feature, list(roster), list(table.dates), table.values[idx]
        )

    dates = tables[TEMPORAL_FEATURES[0]].dates
    cutoff = train_time_cutoff(len(dates), config.window_size, config.horizon)
    stats = NormalizationStats(train_cutoff=cutoff)
    normalized: dict[str, np.ndarray] = {}
    for feature, table in tables.items():
        scaler = ZScoreScaler().fit(table.values.T[:cutoff])
        normalized[feature] = scaler.transform(table.values.T).T
        for j, product in enumerate(table.products):
            stats.set(product, feature, scaler.column_stats(j))

    topology = parse_edges(paths["edges"].read_text(), roster)
    removals["dropped_edges"] = topology.dropped_edge_count
    if "nodes" in paths:
        topology.node_metadata = _parse_node_metadata(paths["nodes"].read_text(), roster)
    norm_adj = normalize_adjacency(topology)
    return PreprocessedStore(
        roster=roster,
        dates=list(dates),
        tables=tables,
        normalized=normalized,
        stats=stats,
        topology=topology,
        norm_adj=norm_adj,
        removals=removals,
        config=config,
    )


def save_store(store: PreprocessedStore, out_dir) -> Path:
    """Persist cleaned tables, stats, and adjacency matrices to disk.

    Raw values are written with 17 significant digits so a reloaded store
    reproduces the in-memory one bit for bit.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for feature, table in store.tables.items():
        (out / f"{feature}.csv").write_text(write_temporal_csv(table, precision=17))
    (out / "edges.csv").write_text(write_edges_csv(store.topology))
    np.savetxt(out / "normalized_adjacency.csv", store.norm_adj.matrix,
               delimiter=",", fmt="%.17g")
    payload = {
        "roster": store.roster,
        "dates": store.dates,
        "removals": store.removals,
        "stats": store.stats.to_dict(),
        "config": store.config.to_dict(),
        "node_metadata": getattr(store.topology, "node_metadata", {}),
    }
    (out / "store.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    return out


def load_store(store_dir) -> PreprocessedStore:
    store_dir = Path(store_dir)
    meta_path = store_dir / "store.json"
    if not meta_path.is_file():
        raise FatalError(f"no preprocessed store at {store_dir}")
    payload = json.loads(meta_path.read_text())
    config = RunConfig.from_dict(payload["config"])
    stats = NormalizationStats.from_dict(payload["stats"])
    tables = {
        feature: parse_temporal_csv((store_dir / f"{feature}.csv").read_text(), feature)
        for feature in TEMPORAL_FEATURES
    }
    roster = payload["roster"]
    normalized = {}
    for feature, table in tables.items():
        norm = np.empty_like(table.values)
        for i, product in enumerate(table.products):
            norm[i], _ = zscore_fit_apply(table.values[i], stats.get(product, feature))
        normalized[feature] = norm
    topology = parse_edges((store_dir / "edges.csv").read_text(), roster)
    topology.node_metadata = payload.get("node_metadata", {})
    norm_adj = NormalizedAdjacency(
        np.loadtxt(store_dir / "normalized_adjacency.csv", delimiter=",", ndmin=2)
    )
    return PreprocessedStore(
        roster=roster,
        dates=payload["dates"],
        tables=tables,
        normalized=normalized,
        stats=stats,
        topology=topology,
        norm_adj=norm_adj,
        removals=payload["removals"],
        config=config,
    )


def cmd_preprocess(data_dir, out_dir, config: RunConfig) -> PreprocessedStore:
    """Build the preprocessed store and persist it with its removal report."""
    store = preprocess(data_dir, config)
    save_store(store, Path(out_dir))
    return store


def product_seed(base_seed: int, product: str) -> int:
    """Stable per-product seed: adding products never shifts the others."""
    return base_seed + zlib.crc32(product.encode("utf-8"))


def _job_seed(base_seed: int, product: str, kind: str) -> int:
    return product_seed(base_seed, product) + zlib.crc32(kind.encode("utf-8"))


def _random_split(samples, seed: int) -> SplitDataset:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    shuffled = [samples[i] for i in order]
    n = len(shuffled)
    n_train = int(np.floor(0.7 * n))
    n_val = int(np.floor(0.2 * n))
    if min(n_train, n_val, n - n_train - n_val) < 1:
        raise ConfigError(f"random split of {n} samples yields an empty subset")
    return SplitDataset(
        train=shuffled[:n_train],
        validation=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
    )


def build_splits(store: PreprocessedStore, config: RunConfig, product: str) -> SplitDataset:
    features = store.feature_tensor()
    target = store.normalized[config.target_feature][store.product_index(product)]
    samples = make_windows(features, target, config.window_size, config.horizon)
    if config.random_split:
        return _random_split(samples, config.seed)
    return chronological_split(samples)


def _model_spec(store: PreprocessedStore, config: RunConfig, product: str,
                kind: str) -> ModelSpec:
    hidden = config.hidden_gcn if kind == "GCN" else config.hidden_fc
    return ModelSpec(
        kind=kind,
        hidden=hidden,
        nodes=len(store.roster),
        features=len(TEMPORAL_FEATURES),
        window=config.window_size,
        focal=store.product_index(product),
    )


def run_single(store: PreprocessedStore, config: RunConfig, product: str,
               kind: str, run_dir: Path | None = None) -> MetricsRow:
    """Train and evaluate one product x model job; optionally persist it."""
    spec = _model_spec(store, config, product, kind)
    splits = build_splits(store, config, product)
    seed = _job_seed(config.seed, product, kind)
    train_cfg = config.train_config(seed)
    adjacency = store.norm_adj.matrix if kind == "GCN" else None
    params, history = train(train_cfg, splits, spec, adjacency)
    row = evaluate(
        params,
        spec,
        splits.test,
        product,
        stats=store.stats.get(product, config.target_feature),
        space=config.space,
        adjacency=adjacency,
    )
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        save_params(params, run_dir / "params")
        (run_dir / "history.csv").write_text(history.to_csv())
        (run_dir / "config.json").write_text(json.dumps({
            "product": product,
            "model_kind": kind,
            "seed": seed,
            "train": json.loads(train_cfg.to_json()),
            "spec": spec.to_dict(),
            "run_config": config.to_dict(),
        }, indent=2, sort_keys=True))
    return row


def _dataset_fingerprint(paths: dict[str, Path]) -> str:
    digest = hashlib.sha256()
    for key in sorted(paths):
        digest.update(key.encode())
        digest.update(hashlib.sha256(paths[key].read_bytes()).digest())
    return digest.hexdigest()


def _source_revision() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=10,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


@dataclass
class RunManifest:
    """Everything needed to reproduce a benchmark run byte for byte."""

    created_at: str
    package_version: str
    source_revision: str
    data_dir: str
    dataset_fingerprint: str
    config: dict
    base_seed: int
    per_product_seeds: dict
    outputs: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True))


def _run_dir_name(product: str, kind: str) -> str:
    return f"{product}__{KIND_TO_FLAG[kind]}"


def _benchmark_job(args: tuple) -> tuple[str, str, dict]:
    """Worker-pool entry: loads the persisted store, runs one job."""
    store_dir, config_dict, product, kind, run_dir = args
    store = load_store(store_dir)
    config = RunConfig.from_dict(config_dict)
    try:
        row = run_single(store, config, product, kind, Path(run_dir))
    except GraphcastError as exc:
        from .models import MODEL_NAMES

        row = MetricsRow(product, MODEL_NAMES[kind], float("nan"), float("nan"),
                         config.space, error=str(exc))
    return product, kind, row.__dict__


def cmd_benchmark(data_dir, out_dir, config: RunConfig, jobs: int = 1) -> tuple[list[MetricsRow], int]:
    """Train and evaluate every surviving product under all three models.

    Single-job failures become NA rows with the error recorded in the
    manifest; they never abort the rest of the run.  Returns the report
    rows and the count of failed rows.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store_dir = out / "preprocessed"
    store = None
    if (store_dir / "store.json").is_file():
        cached = load_store(store_dir)
        if cached.config.to_dict() == config.to_dict():
            store = cached
    if store is None:
        store = cmd_preprocess(data_dir, store_dir, config)

    job_list = [(product, kind) for product in store.roster for kind in MODEL_KINDS]
    results: dict[tuple[str, str], MetricsRow] = {}
    if jobs > 1:
        payloads = [
            (str(store_dir), config.to_dict(), product, kind,
             str(out / "runs" / _run_dir_name(product, kind)))
            for product, kind in job_list
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for product, kind, row_dict in pool.map(_benchmark_job, payloads):
                results[(product, kind)] = MetricsRow(**row_dict)
    else:
        for product, kind in job_list:
            run_dir = out / "runs" / _run_dir_name(product, kind)
            try:
                results[(product, kind)] = run_single(store, config, product, kind, run_dir)
            except GraphcastError as exc:
                from .models import MODEL_NAMES

                results[(product, kind)] = MetricsRow(
                    product, MODEL_NAMES[kind], float("nan"), float("nan"),
                    config.space, error=str(exc),
                )

    rows = [results[(product, kind)] for product, kind in job_list]
    (out / "report.csv").write_text(render_table(rows, "csv"))
    (out / "report.md").write_text(render_table(rows, "markdown"))

    failures = [
        {"product": r.product, "model": r.model, "error": r.error}
        for r in rows if r.error is not None
    ]
    manifest = RunManifest(
        created_at=datetime.now(timezone.utc).isoformat(),
        package_version=_package_version(),
        source_revision=_source_revision(),
        data_dir=str(data_dir),
        dataset_fingerprint=_dataset_fingerprint(locate_inputs(Path(data_dir))),
        config=config.to_dict(),
        base_seed=config.seed,
        per_product_seeds={p: product_seed(config.seed, p) for p in store.roster},
        outputs=sorted(
            str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()
        ),
        failures=failures,
    )
    manifest.write(out / "manifest.json")
    return rows, len(failures)


def _package_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("graphcast")
    except PackageNotFoundError:
        return "0.0.0+local"


def cmd_train(data_dir, out_dir, config: RunConfig, product: str, kind: str) -> MetricsRow:
    out = Path(out_dir)
    store_dir = out / "preprocessed"
    if (store_dir / "store.json").is_file():
        store = load_store(store_dir)
    else:
        store = cmd_preprocess(data_dir, store_dir, config)
    run_dir = out / "runs" / _run_dir_name(product, kind)
    row = run_single(store, config, product, kind, run_dir)
    (run_dir / "row.csv").write_text(render_table([row], "csv"))
    return row


def cmd_evaluate(run_dir, store_dir, space: str | None = None, fmt: str = "csv") -> str:
    """Re-score a persisted training run on its test split."""
    run_dir = Path(run_dir)
    meta_path = run_dir / "config.json"
    if not meta_path.is_file():
        raise FatalError(f"no run config at {meta_path}")
    meta = json.loads(meta_path.read_text())
    config = RunConfig.from_dict(meta["run_config"])
    if space is not None:
        config.space = space
    store = load_store(store_dir)
    spec = ModelSpec.from_dict(meta["spec"])
    params = load_params(run_dir / "params")
    splits = build_splits(store, config, meta["product"])
    adjacency = store.norm_adj.matrix if spec.kind == "GCN" else None
    row = evaluate(
        params, spec, splits.test, meta["product"],
        stats=store.stats.get(meta["product"], config.target_feature),
        space=config.space, adjacency=adjacency,
    )
    return render_table([row], fmt)


def cmd_report(run_dir, fmt: str = "markdown") -> str:
    """Re-render a benchmark report from its persisted CSV."""
    report_path = Path(run_dir) / "report.csv"
    if not report_path.is_file():
        raise FatalError(f"no report at {report_path}")
    return render_table(parse_report_csv(report_path.read_text()), fmt)


def _parse_hidden(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"hidden widths must be comma-separated ints, got {text!r}") from None


_CONFIG_FLAGS = (
    "window_size", "horizon", "batch_size", "epochs", "lr", "seed",
    "shuffle", "shuffle_seed", "select_best_val", "random_split",
    "zero_fraction_threshold", "target_feature", "space",
    "hidden_fc", "hidden_gcn",
)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    payload = RunConfig().to_dict()
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            payload.update(json.loads(Path(config_path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise FatalError(f"cannot read config file {config_path}: {exc}") from None
    for key in _CONFIG_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            payload[key] = value
    try:
        return RunConfig.from_dict(payload)
    except (ConfigError, TypeError) as exc:
        raise FatalError(f"bad configuration: {exc}") from None


def _resolve_data_dir(args: argparse.Namespace) -> Path:
    data_dir = getattr(args, "data_dir", None) or os.environ.get(ENV_DATA_DIR)
    if not data_dir:
        raise FatalError(
            f"no data directory given: pass --data-dir or set {ENV_DATA_DIR}"
        )
    return Path(data_dir)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("--window-size", dest="window_size", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--shuffle-seed", dest="shuffle_seed", type=int)
    parser.add_argument("--select-best-val", dest="select_best_val",
                        action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--random-split", dest="random_split",
                        action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--zero-threshold", dest="zero_fraction_threshold", type=float)
    parser.add_argument("--target-feature", dest="target_feature",
                        choices=list(TEMPORAL_FEATURES))
    parser.add_argument("--space", choices=["normalized", "raw-units"])
    parser.add_argument("--raw-units", dest="space", action="store_const",
                        const="raw-units")
    parser.add_argument("--hidden", dest="hidden_fc", type=_parse_hidden,
                        help="comma-separated hidden widths for MLP/GNN")
    parser.add_argument("--hidden-gcn", dest="hidden_gcn", type=_parse_hidden,
                        help="comma-separated hidden widths for GCN layers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphcast",
        description="Graph time-series demand forecasting over product networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--products", type=int, default=8)
    p_synth.add_argument("--timepoints", type=int, default=221)
    p_synth.add_argument("--edge-prob", type=float, default=0.3)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--process", choices=list(PROCESS_KINDS), default="linear-AR")
    p_synth.add_argument("--ar-coeff", type=float, default=0.8)
    p_synth.add_argument("--noise-sigma", type=float, default=0.1)

    p_prep = sub.add_parser("preprocess", help="clean data and build the store")
    p_prep.add_argument("--data-dir", dest="data_dir")
    p_prep.add_argument("--out", required=True)
    _add_config_flags(p_prep)

    p_train = sub.add_parser("train", help="train one product x model run")
    p_train.add_argument("--data-dir", dest="data_dir")
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--product", required=True)
    p_train.add_argument("--model", required=True, choices=sorted(KIND_BY_FLAG))
    _add_config_flags(p_train)

    p_eval = sub.add_parser("evaluate", help="re-score a saved training run")
    p_eval.add_argument("--run-dir", required=True)
    p_eval.add_argument("--store-dir", required=True)
    p_eval.add_argument("--space", choices=["normalized", "raw-units"])
    p_eval.add_argument("--raw-units", dest="space", action="store_const",
                        const="raw-units")
    p_eval.add_argument("--format", choices=["csv", "markdown"], default="csv")

    p_bench = sub.add_parser("benchmark", help="train and report every product x model")
    p_bench.add_argument("--data-dir", dest="data_dir")
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--strict", action="store_true",
                         help="exit nonzero when any row fails")
    _add_config_flags(p_bench)

    p_report = sub.add_parser("report", help="re-render a benchmark report")
    p_report.add_argument("--run-dir", required=True)
    p_report.add_argument("--format", choices=["csv", "markdown"], default="markdown")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            cfg = SynthConfig(
                num_products=args.products,
                num_timepoints=args.timepoints,
                edge_probability=args.edge_prob,
                seed=args.seed,
                kind=args.process,
                ar_coeff=args.ar_coeff,
                noise_sigma=args.noise_sigma,
            )
            paths = write_dataset(cfg, args.out)
            print(f"wrote {len(paths)} files to {args.out}")
            return EXIT_OK
        if args.command == "preprocess":
            config = resolve_config(args)
            store = cmd_preprocess(_resolve_data_dir(args), Path(args.out), config)
            dropped = sorted(
                set(store.removals["not_in_all_files"])
                | {c for lst in store.removals["missing_values"].values() for c in lst}
                | {c for lst in store.removals["low_quality"].values() for c in lst}
            )
            print(f"store written to {args.out}: {len(store.roster)} products kept, "
                  f"{len(dropped)} dropped")
            return EXIT_OK
        if args.command == "train":
            config = resolve_config(args)
            row = cmd_train(_resolve_data_dir(args), Path(args.out), config,
                            args.product, KIND_BY_FLAG[args.model])
            print(render_table([row], "csv"), end="")
            return EXIT_OK
        if args.command == "evaluate":
            print(cmd_evaluate(args.run_dir, args.store_dir, args.space, args.format),
                  end="")
            return EXIT_OK
        if args.command == "benchmark":
            config = resolve_config(args)
            rows, failed = cmd_benchmark(_resolve_data_dir(args), Path(args.out),
                                         config, jobs=args.jobs)
            print(f"report written to {args.out}/report.csv "
                  f"({len(rows)} rows, {failed} failed)")
            if failed and args.strict:
                return EXIT_FAILED_ROWS
            return EXIT_OK
        if args.command == "report":
            print(cmd_report(args.run_dir, args.format), end="")
            return EXIT_OK
        raise FatalError(f"unknown command {args.command!r}")
    except FatalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except GraphcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
