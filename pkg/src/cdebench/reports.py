"""Report emission: heatmap CSVs, average ranks, and significance stars."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .harness import RunRecord, format_float, write_records
from .stats import holm_bonferroni, welch_one_sided

QUALITY_METRICS = ("cde_loss", "log_lik", "crps", "pit_ks", "coverage90")

# better direction per metric; "nominal" means judged by |value - 0.9|
METRIC_DIRECTIONS = {
    "cde_loss": "lower",
    "log_lik": "higher",
    "crps": "lower",
    "pit_ks": "lower",
    "coverage90": "nominal",
}

TIME_METRIC = "total_time_s"

FAILED_CELL = "×"


def _check_metric(metric):
    if metric not in METRIC_DIRECTIONS and metric != TIME_METRIC:
        raise ValueError(f"unknown metric {metric!r}")


def _ordered_unique(items):
    seen = {}
    for item in items:
        seen.setdefault(item, None)
    return list(seen)


def _store_axes(records):
    """Method and (dataset, n) orders as they first appear in the store."""
    methods = _ordered_unique(r.method for r in records)
    cells = _ordered_unique((r.dataset, r.n) for r in records)
    return methods, cells


def _metric_value(rec: RunRecord, metric: str) -> float:
    if metric == TIME_METRIC:
        return rec.metrics.fit_time_s + rec.metrics.predict_time_s
    return getattr(rec.metrics, metric)


def _rep_values(records, metric):
    """{(dataset, n): {method: per-rep values}} over finished records."""
    table = {}
    for rec in records:
        if rec.status != "ok":
            continue
        cell = table.setdefault((rec.dataset, rec.n), {})
        cell.setdefault(rec.method, []).append(_metric_value(rec, metric))
    return table


def _rank_keys(means, metric):
    direction = METRIC_DIRECTIONS.get(metric, "lower")
    if direction == "nominal":
        return np.abs(means - 0.9)
    if direction == "higher":
        return -means
    return means


def rank_table(records, metric):
    """Per-cell average-tie ranks plus each method's mean rank.

    Returns ({(dataset, n): {method: rank}}, {method: mean rank}). A cell
    ranks the per-rep means of every method that finished there; cells with
    fewer than two finishers rank nothing. Rank 1 is best: lower values for
    CDE loss, CRPS, the PIT KS statistic, and time, higher values for
    log-likelihood, and coverage closest to 0.9. A method's mean rank runs
    over the cells it finished.
    """
    _check_metric(metric)
    values = _rep_values(records, metric)
    cells = {}
    for cell, per_method in values.items():
        if len(per_method) < 2:
            continue
        names = list(per_method)
        means = np.array([np.mean(per_method[m]) for m in names])
        ranks = rankdata(_rank_keys(means, metric), method="average")
        cells[cell] = dict(zip(names, ranks))
    methods, _ = _store_axes(records)
    mean_ranks = {}
    for m in methods:
        got = [cell_ranks[m] for cell_ranks in cells.values() if m in cell_ranks]
        if got:
            mean_ranks[m] = float(np.mean(got))
    return cells, mean_ranks


@dataclass(frozen=True)
class SignificanceResult:
    """One Welch comparison inside a Holm family."""

    foundation: str
    competitor: str
    dataset: str
    n: int
    metric: str
    t: float
    p: float
    reject: bool


def _welch_sample(vals, metric):
    arr = np.asarray(vals, dtype=float)
    if METRIC_DIRECTIONS[metric] == "nominal":
        return np.abs(arr - 0.9)
    return arr


def _welch_pair(f_vals, c_vals, metric):
    """(t, p) for one comparison, or None when it cannot be tested."""
    if f_vals.size < 2 or c_vals.size < 2:
        return None
    direction = "higher" if METRIC_DIRECTIONS[metric] == "higher" else "lower"
    se_f = float(np.std(f_vals, ddof=1) / np.sqrt(f_vals.size))
    se_c = float(np.std(c_vals, ddof=1) / np.sqrt(c_vals.size))
    try:
        return welch_one_sided(
            float(f_vals.mean()), se_f, f_vals.size, float(c_vals.mean()), se_c, c_vals.size, direction
        )
    except ValueError:
        return None


def significance_table(records, foundations=None, alpha=0.1):
    """Welch tests of each foundation method against every competitor.

    One Holm family per (foundation, dataset, n, metric); the foundation
    earns a star only when every comparison in the family rejects. Returns
    (results, stars) where stars maps (foundation, dataset, n, metric) to a
    bool. Competitors that never finished a cell drop out of its families;
    a comparison with fewer than two finished reps on a side, or with no
    variance on either side, cannot reject and contributes no result row.
    """
    methods, cellkeys = _store_axes(records)
    if foundations is None:
        foundations = methods
    else:
        missing = [f for f in foundations if f not in methods]
        if missing:
            raise ValueError(f"methods not in this store: {missing}")
    results = []
    stars = {}
    for metric in QUALITY_METRICS:
        values = _rep_values(records, metric)
        for foundation in foundations:
            for cell in cellkeys:
                per_method = values.get(cell, {})
                if foundation not in per_method:
                    continue
                dataset, n = cell
                f_vals = _welch_sample(per_method[foundation], metric)
                comparisons = []
                for competitor in methods:
                    if competitor == foundation or competitor not in per_method:
                        continue
                    c_vals = _welch_sample(per_method[competitor], metric)
                    comparisons.append((competitor, _welch_pair(f_vals, c_vals, metric)))
                computable = [(c, tp) for c, tp in comparisons if tp is not None]
                flags = holm_bonferroni([tp[1] for _, tp in computable], alpha)
                for (competitor, (t, p)), rej in zip(computable, flags):
                    results.append(
                        SignificanceResult(foundation, competitor, dataset, n, metric, t, p, bool(rej))
                    )
                stars[(foundation, dataset, n, metric)] = (
                    len(comparisons) > 0
                    and len(computable) == len(comparisons)
                    and bool(np.all(flags))
                )
    return results, stars


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _heatmap_cell(vals):
    if not vals:
        return FAILED_CELL
    arr = np.asarray(vals, dtype=float)
    se = float(np.std(arr, ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return f"{format_float(arr.mean())} ({format_float(se)})"


def heatmap_csv(records, metric) -> str:
    """Methods x datasets CSV of "mean (se)" cells; failed cells show x."""
    _check_metric(metric)
    methods, cells = _store_axes(records)
    values = _rep_values(records, metric)
    rows = [["method"] + [f"{d}@{n}" for d, n in cells]]
    for m in methods:
        rows.append([m] + [_heatmap_cell(values.get(cell, {}).get(m)) for cell in cells])
    return _csv_text(rows)


def ranks_csv(records) -> str:
    """Average rank per method and quality metric."""
    methods, _ = _store_axes(records)
    per_metric = {metric: rank_table(records, metric)[1] for metric in QUALITY_METRICS}
    rows = [["method"] + list(QUALITY_METRICS)]
    for m in methods:
        row = [m]
        for metric in QUALITY_METRICS:
            mean_rank = per_metric[metric].get(m)
            row.append(FAILED_CELL if mean_rank is None else format_float(mean_rank))
        rows.append(row)
    return _csv_text(rows)


def stars_csv(records, foundations=None, alpha=0.1) -> str:
    """Long-form star flags: one row per (method, dataset, n, metric)."""
    methods, cells = _store_axes(records)
    if foundations is None:
        foundations = methods
    _, stars = significance_table(records, foundations, alpha)
    rows = [["method", "dataset", "n", "metric", "starred"]]
    for m in foundations:
        for dataset, n in cells:
            for metric in QUALITY_METRICS:
                key = (m, dataset, n, metric)
                if key in stars:
                    rows.append([m, dataset, n, metric, "*" if stars[key] else ""])
    return _csv_text(rows)


def significance_csv(results) -> str:
    """Every Welch comparison with its Holm decision."""
    rows = [["foundation", "competitor", "dataset", "n", "metric", "t", "p", "reject"]]
    for r in results:
        rows.append(
            [r.foundation, r.competitor, r.dataset, r.n, r.metric,
             format_float(r.t), format_float(r.p), "yes" if r.reject else "no"]
        )
    return _csv_text(rows)


def emit_reports(records, out_dir):
    """Write one store's report family into `out_dir`.

    heatmap_<metric>.csv per metric (the five quality metrics plus total
    time), ranks.csv, stars.csv, and records.jsonl. Reruns of the same
    store produce identical bytes; only the timing fields vary run to run.
    """
    if not records:
        raise ValueError("empty results store, nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for metric in QUALITY_METRICS + (TIME_METRIC,):
        (out / f"heatmap_{metric}.csv").write_text(heatmap_csv(records, metric), encoding="utf-8")
    (out / "ranks.csv").write_text(ranks_csv(records), encoding="utf-8")
    (out / "stars.csv").write_text(stars_csv(records), encoding="utf-8")
    write_records(records, out / "records.jsonl")
