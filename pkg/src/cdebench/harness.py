"""Benchmark protocol: repeated splits, random-search tuning, and the run loop.

A run is a grid of jobs (dataset x size x rep x method). Each job fits on
its split's training rows, predicts every test row on the shared per-split
grid, and scores the six metrics. Failures become failed records, never
aborts. Reports and significance tests read the persisted record stream.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, kfold_indices, load_csv_dataset
from .dgp import DGP_REGISTRY, synthetic_pool
from .grid import make_eval_grid, trapz_uniform
from .interchange import read_predictions
from .methods import METHOD_REGISTRY, ORACLE_NAME, get_method
from .scoring import (
    MetricBundle,
    cde_loss,
    cdf_matrix_from_density_matrix,
    score_matrices,
    score_prediction_file,
)

TEST_FRACTION = 0.25

# every size runs 5 independent splits, except the smallest which runs 50
SMALL_N = 50
SMALL_N_REPS = 50
DEFAULT_REPS = 5


@dataclass(frozen=True)
class SplitPlan:
    """Repeated 75/25 train/test splits at a fixed training size."""

    n_target: int
    master_seed: int = 0

    def __post_init__(self):
        if self.n_target < 2:
            raise ValueError("n_target must be at least 2")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    @property
    def reps(self) -> int:
        return SMALL_N_REPS if self.n_target == SMALL_N else DEFAULT_REPS

    @property
    def total_rows(self) -> int:
        """Rows drawn per rep so that n_target is 75% of them, rounded up."""
        return -(-4 * self.n_target // 3)

    @property
    def test_rows(self) -> int:
        return self.total_rows - self.n_target


def make_splits(ds: Dataset, plan: SplitPlan):
    """Per-rep (train indices, test indices) pairs into `ds`.

    Each rep shuffles the full dataset with a seed derived only from
    (master_seed, rep) and keeps the first total_rows of the permutation:
    train is the prefix, test the rest. Because the shuffle never sees
    n_target, training prefixes nest across sizes for the same rep.
    """
    if ds.n < plan.total_rows:
        raise ValueError(
            f"dataset too small: n_target {plan.n_target} needs {plan.total_rows} rows, have {ds.n}"
        )
    splits = []
    for rep in range(plan.reps):
        perm = np.random.default_rng([plan.master_seed, rep]).permutation(ds.n)
        splits.append((perm[: plan.n_target], perm[plan.n_target : plan.total_rows]))
    return splits


@dataclass(frozen=True)
class TuneSpec:
    """Random-search budget: 8 draws scored by 3-fold CV on the CDE loss."""

    draws: int = 8
    folds: int = 3

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be positive")
        if self.folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")


def tune(method, ds_train: Dataset, spec: TuneSpec | None = None, seed: int = 0) -> dict:
    """Hyperparameters with the lowest mean CDE loss across CV folds.

    Draws configurations uniformly from the method's search grid, with
    replacement, and breaks ties toward the earliest draw. A draw whose fit
    raises loses the search instead of killing the job; only a search in
    which every draw fails is an error.
    """
    if isinstance(method, str):
        method = get_method(method)
    if not method.tunable:
        raise ValueError(f"{method.name} has no search space to tune over")
    spec = spec or TuneSpec()
    rng = np.random.default_rng(seed)
    configs = [
        {key: choices[rng.integers(len(choices))] for key, choices in method.search_space.items()}
        for _ in range(spec.draws)
    ]
    folds = kfold_indices(ds_train.n, spec.folds, rng)
    mean_losses = []
    for params in configs:
        losses = []
        for fold_train, fold_val in folds:
            sub = ds_train.subset(fold_train)
            grid = make_eval_grid(sub.response)
            try:
                model = method.fit(sub, params, seed=seed)
                dens = method.density_matrix(model, ds_train.features[fold_val], grid)
            except Exception:
                losses = None
                break
            losses.append(cde_loss((dens, grid), ds_train.response[fold_val]))
        mean_losses.append(np.inf if losses is None else float(np.mean(losses)))
    best = int(np.argmin(mean_losses))
    if not np.isfinite(mean_losses[best]):
        raise RuntimeError(f"every {method.name} configuration failed during tuning")
    return configs[best]


def stable_seed(*parts) -> int:
    """31-bit seed from the string forms of `parts`, via SHA-256."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") >> 1


def format_float(x) -> str:
    """17 significant digits: enough to reproduce the double bit-for-bit."""
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("refusing to serialize a non-finite number")
    return f"{x:.17g}"


def json_line(obj) -> str:
    """Compact JSON with every float rendered by format_float."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return json.dumps(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{json_line(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(json_line(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize a {type(obj).__name__}")


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one (dataset, method, n, rep) job."""

    dataset: str
    method: str
    n: int
    rep: int
    seed: int
    status: str
    params: dict
    metrics: MetricBundle | None
    error: str | None = None

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError(f"status must be 'ok' or 'failed', not {self.status!r}")
        if (self.metrics is None) == (self.status == "ok"):
            raise ValueError("ok records carry metrics; failed records carry none")
        if self.status == "failed" and not self.error:
            raise ValueError("failed records need the error text")

    @property
    def key(self):
        return (self.dataset, self.method, self.n, self.rep)


def _record_to_obj(rec: RunRecord) -> dict:
    return {
        "dataset": rec.dataset,
        "method": rec.method,
        "n": rec.n,
        "rep": rec.rep,
        "seed": rec.seed,
        "status": rec.status,
        "params": rec.params,
        "metrics": None if rec.metrics is None else rec.metrics.as_dict(),
        "error": rec.error,
    }


def _record_from_obj(obj: dict) -> RunRecord:
    missing = [
        k for k in ("dataset", "method", "n", "rep", "seed", "status", "params", "metrics") if k not in obj
    ]
    if missing:
        raise ValueError(f"record is missing {missing}")
    metrics = obj["metrics"]
    return RunRecord(
        dataset=obj["dataset"],
        method=obj["method"],
        n=int(obj["n"]),
        rep=int(obj["rep"]),
        seed=int(obj["seed"]),
        status=obj["status"],
        params=dict(obj["params"]),
        metrics=None if metrics is None else MetricBundle(**metrics),
        error=obj.get("error"),
    )


def write_records(records, path):
    """Persist records as one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json_line(_record_to_obj(rec)) + "\n")


def read_records(path):
    """Reload a record stream, enforcing one record per (dataset, method, n, rep)."""
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                raise ValueError(f"{path} line {line_no}: blank line in a record stream")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path} line {line_no}: malformed JSON ({err.msg})") from None
            if not isinstance(obj, dict):
                raise ValueError(f"{path} line {line_no}: record must be a JSON object")
            try:
                rec = _record_from_obj(obj)
            except (TypeError, ValueError) as err:
                raise ValueError(f"{path} line {line_no}: {err}") from None
            if rec.key in seen:
                raise ValueError(f"{path} line {line_no}: duplicate record for {rec.key}")
            seen.add(rec.key)
            records.append(rec)
    return records


@dataclass(frozen=True)
class BenchmarkConfig:
    """One full benchmark run.

    Datasets are synthetic generator names or CSV paths; a path may carry
    an explicit target column as "data.csv#column" and otherwise uses the
    last column. External predictions are interchange files scored against
    the splits this config generates.
    """

    datasets: tuple
    methods: tuple
    sizes: tuple
    seed: int
    out: str
    external_predictions: tuple = ()
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "external_predictions", tuple(self.external_predictions))
        if not self.datasets or not self.methods or not self.sizes:
            raise ValueError("config needs at least one dataset, method, and size")
        for group, label in (
            (self.datasets, "datasets"),
            (self.methods, "methods"),
            (self.sizes, "sizes"),
        ):
            if len(set(group)) != len(group):
                raise ValueError(f"duplicate entries in {label}: record keys would repeat")
        for name in self.methods:
            if name != ORACLE_NAME and name not in METHOD_REGISTRY:
                raise ValueError(f"unknown method {name!r}")
        if any(s < 2 for s in self.sizes):
            raise ValueError("sizes must be at least 2")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be positive")


_CONFIG_KEYS = {"datasets", "methods", "sizes", "seed", "out", "external_predictions", "workers"}
_REQUIRED_KEYS = ("datasets", "methods", "sizes", "seed", "out")


def load_config(path) -> BenchmarkConfig:
    """Parse a JSON run config; see BenchmarkConfig for field meanings."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    unknown = sorted(set(obj) - _CONFIG_KEYS)
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    missing = [k for k in _REQUIRED_KEYS if k not in obj]
    if missing:
        raise ValueError(f"{path}: config is missing {missing}")
    return BenchmarkConfig(
        datasets=obj["datasets"],
        methods=obj["methods"],
        sizes=obj["sizes"],
        seed=int(obj["seed"]),
        out=str(obj["out"]),
        external_predictions=obj.get("external_predictions", ()),
        workers=int(obj.get("workers", 1)),
    )


def _split_entry(entry: str):
    head, sep, target = entry.rpartition("#")
    return (head, target) if sep else (entry, None)


def _csv_target(path, target):
    if target:
        return target
    with open(path, "r", encoding="utf-8", newline="") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
    return header[-1].strip()


def dataset_name(entry: str) -> str:
    """The short name a dataset entry is reported under."""
    if entry in DGP_REGISTRY:
        return entry
    path, _ = _split_entry(entry)
    return Path(path).stem


def resolve_dataset(entry: str, master_seed: int):
    """-> (name, Dataset, generator or None).

    Synthetic names draw the fixed pool for this master seed; anything else
    is treated as a CSV path, optionally suffixed "#column".
    """
    if entry in DGP_REGISTRY:
        return entry, synthetic_pool(entry, master_seed), DGP_REGISTRY[entry]
    path, target = _split_entry(entry)
    ds = load_csv_dataset(path, _csv_target(path, target))
    return Path(path).stem, ds, None


def _run_single_job(args) -> RunRecord:
    """One (dataset, size, rep, method) cell; failures come back as records."""
    entry, n, rep, method_name, master_seed = args
    name = dataset_name(entry)
    job_seed = stable_seed(master_seed, name, method_name, n, rep)
    try:
        _, ds, dgp = resolve_dataset(entry, master_seed)
        train_idx, test_idx = make_splits(ds, SplitPlan(n, master_seed))[rep]
        train = ds.subset(train_idx)
        grid = make_eval_grid(train.response)
        X_test = ds.features[test_idx]
        y_test = ds.response[test_idx]
        if method_name == ORACLE_NAME:
            if dgp is None:
                raise ValueError("Oracle needs a synthetic dataset with a known truth")
            params = {}
            fit_time = 0.0
            start = time.perf_counter()
            dens = dgp.density_matrix(X_test, grid)
            # the exact density loses tail mass to grid truncation; renormalize
            dens = dens / trapz_uniform(dens, grid.dx)[:, None]
            predict_time = time.perf_counter() - start
        else:
            method = get_method(method_name)
            start = time.perf_counter()
            params = tune(method, train, seed=job_seed) if method.tunable else {}
            model = method.fit(train, params, seed=job_seed)
            fit_time = time.perf_counter() - start
            start = time.perf_counter()
            dens = method.density_matrix(model, X_test, grid)
            predict_time = time.perf_counter() - start
        cdfs = cdf_matrix_from_density_matrix(dens, grid)
        metrics = score_matrices(dens, cdfs, grid, y_test, fit_time, predict_time)
        return RunRecord(name, method_name, n, rep, job_seed, "ok", params, metrics)
    except Exception as err:
        return RunRecord(
            name, method_name, n, rep, job_seed, "failed", {}, None, f"{type(err).__name__}: {err}"
        )


def _score_external(config: BenchmarkConfig):
    """Score interchange files against the splits their headers name."""
    entries = {dataset_name(e): e for e in config.datasets}
    records = []
    for i, pred_path in enumerate(config.external_predictions):
        name, method_name, n, rep = Path(pred_path).name, "external", 0, i
        try:
            header, _ = read_predictions(pred_path)
            name, method_name, n, rep = header.dataset, header.method, header.n_train, header.rep
            if name not in entries:
                raise ValueError(f"prediction file names a dataset outside this run: {name!r}")
            _, ds, _ = resolve_dataset(entries[name], config.seed)
            plan = SplitPlan(n, config.seed)
            if rep >= plan.reps:
                raise ValueError(f"rep {rep} out of range, the plan for n={n} has {plan.reps} reps")
            train_idx, test_idx = make_splits(ds, plan)[rep]
            grid = make_eval_grid(ds.response[train_idx])
            metrics = score_prediction_file(pred_path, ds.response[test_idx], grid)
            seed = stable_seed(config.seed, name, method_name, n, rep)
            records.append(RunRecord(name, method_name, n, rep, seed, "ok", {}, metrics))
        except Exception as err:
            records.append(
                RunRecord(name, method_name, n, rep, 0, "failed", {}, None, f"{type(err).__name__}: {err}")
            )
    return records


def run_benchmark(config: BenchmarkConfig):
    """Execute every job in the config, score external files, and report.

    Returns the records in job order: the internal grid first (dataset,
    size, rep, method, as configured), then one record per external file.
    The output directory receives records.jsonl and the CSV report family.
    """
    from .reports import emit_reports  # reports.py imports this module

    jobs = [
        (entry, n, rep, method, config.seed)
        for entry in config.datasets
        for n in config.sizes
        for rep in range(SplitPlan(n, config.seed).reps)
        for method in config.methods
    ]
    if config.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_single_job, jobs))
    else:
        records = [_run_single_job(job) for job in jobs]
    records.extend(_score_external(config))
    seen = set()
    for rec in records:
        if rec.key in seen:
            raise ValueError(f"external prediction duplicates the run key {rec.key}")
        seen.add(rec.key)
    emit_reports(records, config.out)
    return records
