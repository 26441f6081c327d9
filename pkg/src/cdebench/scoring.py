"""Scoring rules for conditional density predictions.

Six numbers per prediction file: quadratic CDE loss, mean log-likelihood,
mean CRPS, a Kolmogorov-Smirnov statistic on PIT values, 90% central
coverage, and wall-clock fit/predict time carried through from the producer.
All integrals are trapezoid sums on the shared grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import kolmogorov

from .grid import GRID_SIZE, CdfCurve, EvalGrid, GridDensity, make_eval_grid, trapz_uniform
from .interchange import read_predictions, record_to_cdf, record_to_density

LOG_DENSITY_FLOOR = 1e-20


@dataclass(frozen=True)
class MetricBundle:
    cde_loss: float
    log_lik: float
    crps: float
    pit_ks: float
    coverage90: float
    fit_time_s: float
    predict_time_s: float

    def as_dict(self) -> dict:
        return {
            "cde_loss": self.cde_loss,
            "log_lik": self.log_lik,
            "crps": self.crps,
            "pit_ks": self.pit_ks,
            "coverage90": self.coverage90,
            "fit_time_s": self.fit_time_s,
            "predict_time_s": self.predict_time_s,
        }


@dataclass(frozen=True)
class PitSample:
    """Probability integral transform values, one per test point."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("PIT sample must be a non-empty vector")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("PIT values must lie in [0, 1]")


def _density_matrix(densities):
    """Stack a list of GridDensity onto one grid; passthrough for (matrix, grid)."""
    if isinstance(densities, tuple) and len(densities) == 2:
        return densities
    if not densities:
        raise ValueError("need at least one density")
    grid = densities[0].grid
    for gd in densities[1:]:
        if not gd.grid.same_as(grid):
            raise ValueError("all densities must share one grid")
    return np.vstack([gd.values for gd in densities]), grid


def _cdf_matrix(cdfs):
    if isinstance(cdfs, tuple) and len(cdfs) == 2:
        return cdfs
    if not cdfs:
        raise ValueError("need at least one cdf")
    grid = cdfs[0].grid
    for c in cdfs[1:]:
        if not c.grid.same_as(grid):
            raise ValueError("all cdfs must share one grid")
    return np.vstack([c.values for c in cdfs]), grid


def _interp_rows(mat, grid: EvalGrid, y, fill: float):
    """Row i of `mat` linearly interpolated at y[i]; `fill` outside the grid."""
    y = np.asarray(y, dtype=float)
    pos = (y - grid.lo) / grid.dx
    inside = (pos >= 0.0) & (pos <= GRID_SIZE - 1)
    pc = np.clip(pos, 0.0, GRID_SIZE - 1)
    i0 = np.minimum(pc.astype(np.int64), GRID_SIZE - 2)
    frac = pc - i0
    rows = np.arange(mat.shape[0])
    vals = mat[rows, i0] * (1.0 - frac) + mat[rows, i0 + 1] * frac
    return np.where(inside, vals, fill)


def cde_loss(densities, y_test) -> float:
    """Quadratic density loss: mean of integral(f^2) minus twice mean of f(y).

    Minimized in expectation by the true conditional density; negative values
    are normal and lower is better.
    """
    mat, grid = _density_matrix(densities)
    y = np.asarray(y_test, dtype=float)
    if y.size != mat.shape[0]:
        raise ValueError(f"{mat.shape[0]} densities vs {y.size} outcomes")
    term_sq = trapz_uniform(mat * mat, grid.dx).mean()
    term_at = _interp_rows(mat, grid, y, fill=0.0).mean()
    return float(term_sq - 2.0 * term_at)


def log_likelihood(densities, y_test):
    """Mean log predictive density and the fraction of floor-clamped points.

    Densities below 1e-20 (including points outside the grid) are clamped
    before the log so a single miss cannot produce -inf.
    """
    mat, grid = _density_matrix(densities)
    y = np.asarray(y_test, dtype=float)
    if y.size != mat.shape[0]:
        raise ValueError(f"{mat.shape[0]} densities vs {y.size} outcomes")
    at = _interp_rows(mat, grid, y, fill=0.0)
    clamped = at < LOG_DENSITY_FLOOR
    ll = np.log(np.maximum(at, LOG_DENSITY_FLOOR))
    return float(ll.mean()), float(clamped.mean())


def crps_from_cdf_matrix(cdf_mat, grid: EvalGrid, y_test):
    """Per-point CRPS: integral of (F(t) - 1{t >= y})^2 over the grid."""
    y = np.asarray(y_test, dtype=float)
    ind = grid.points[None, :] >= y[:, None]
    return trapz_uniform((cdf_mat - ind) ** 2, grid.dx)


def crps(record, y: float, grid: EvalGrid) -> float:
    """CRPS of one prediction record at outcome y.

    Quantile records use the CDF built straight from the quantile function;
    grid and bar records integrate their density into a CDF first.
    """
    curve = record_to_cdf(record, grid)
    return float(crps_from_cdf_matrix(curve.values[None, :], grid, [y])[0])


def pit_values(cdfs, y_test) -> PitSample:
    """PIT u_i = F_i(y_i), clamped to the curve end values outside the grid."""
    mat, grid = _cdf_matrix(cdfs)
    y = np.asarray(y_test, dtype=float)
    if y.size != mat.shape[0]:
        raise ValueError(f"{mat.shape[0]} cdfs vs {y.size} outcomes")
    pos = np.clip((y - grid.lo) / grid.dx, 0.0, GRID_SIZE - 1)
    i0 = np.minimum(pos.astype(np.int64), GRID_SIZE - 2)
    frac = pos - i0
    rows = np.arange(mat.shape[0])
    u = mat[rows, i0] * (1.0 - frac) + mat[rows, i0 + 1] * frac
    return PitSample(np.clip(u, 0.0, 1.0))


def ks_uniform(pit: PitSample) -> float:
    """Exact KS distance between the PIT sample and the uniform on [0, 1]."""
    u = np.sort(pit.values)
    m = u.size
    i = np.arange(1, m + 1)
    return float(np.maximum(i / m - u, u - (i - 1) / m).max())


def ks_pvalue(d: float, m: int) -> float:
    """Asymptotic Kolmogorov p-value for a KS distance at sample size m.

    Acceptance-test helper; the benchmark itself reports the raw distance.
    """
    return float(kolmogorov(d * np.sqrt(m)))


def _cdf_quantile_rows(cdf_mat, grid: EvalGrid, level: float):
    """Vectorized cdf_quantile across rows (same flat-segment semantics)."""
    m = cdf_mat.shape[0]
    idx = (cdf_mat < level).sum(axis=1)
    out = np.empty(m)
    at_lo = idx == 0
    at_hi = idx >= GRID_SIZE
    out[at_lo] = grid.lo
    out[at_hi] = grid.hi
    mid = ~(at_lo | at_hi)
    rows = np.flatnonzero(mid)
    if rows.size:
        i1 = idx[rows]
        v1 = cdf_mat[rows, i1]
        v0 = cdf_mat[rows, i1 - 1]
        pts = grid.points
        exact = v1 <= level
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (level - v0) / (v1 - v0)
        interp = pts[i1 - 1] + t * (pts[i1] - pts[i1 - 1])
        out[rows] = np.where(exact, pts[i1], interp)
    return out


def coverage90(cdfs, y_test) -> float:
    """Fraction of outcomes inside the [0.05, 0.95] predictive interval."""
    mat, grid = _cdf_matrix(cdfs)
    y = np.asarray(y_test, dtype=float)
    if y.size != mat.shape[0]:
        raise ValueError(f"{mat.shape[0]} cdfs vs {y.size} outcomes")
    lo = _cdf_quantile_rows(mat, grid, 0.05)
    hi = _cdf_quantile_rows(mat, grid, 0.95)
    return float(((y >= lo) & (y <= hi)).mean())


def cdf_matrix_from_density_matrix(dens_mat, grid: EvalGrid):
    """Row-wise cumulative trapezoid of normalized density rows."""
    dx = grid.dx
    cum = np.concatenate(
        [np.zeros((dens_mat.shape[0], 1)), np.cumsum(0.5 * (dens_mat[:, 1:] + dens_mat[:, :-1]) * dx, axis=1)],
        axis=1,
    )
    last = cum[:, -1:]
    if np.any(np.abs(last - 1.0) > 1e-6):
        raise ValueError("density rows must be normalized before building CDFs")
    return cum / last


def score_matrices(dens_mat, cdf_mat, grid: EvalGrid, y_test, fit_time_s: float, predict_time_s: float) -> MetricBundle:
    """All six metrics from stacked density and CDF rows (the fast path)."""
    y = np.asarray(y_test, dtype=float)
    ll, _ = log_likelihood((dens_mat, grid), y)
    pit = pit_values((cdf_mat, grid), y)
    return MetricBundle(
        cde_loss=cde_loss((dens_mat, grid), y),
        log_lik=ll,
        crps=float(crps_from_cdf_matrix(cdf_mat, grid, y).mean()),
        pit_ks=ks_uniform(pit),
        coverage90=coverage90((cdf_mat, grid), y),
        fit_time_s=float(fit_time_s),
        predict_time_s=float(predict_time_s),
    )


def score_prediction_file(pred_path, y_test, grid: EvalGrid | None = None, timings=None) -> MetricBundle:
    """Score an interchange file against held-out outcomes.

    The caller normally passes the per-split grid built from training
    responses; without one, the grid of the first grid-type record is used,
    falling back to a grid built from y_test. Timings default to the header.
    """
    header, records = read_predictions(pred_path)
    y = np.asarray(y_test, dtype=float)
    if len(records) != y.size:
        raise ValueError(f"{pred_path}: {len(records)} records but {y.size} outcomes")
    if grid is None:
        grid = next((r.payload.grid for r in records if r.kind == "grid"), None) or make_eval_grid(y)
    dens_mat = np.vstack([record_to_density(r, grid).values for r in records])
    cdf_rows = []
    for i, rec in enumerate(records):
        if rec.kind == "quantiles":
            cdf_rows.append(record_to_cdf(rec, grid).values)
        else:
            cdf_rows.append(None)
    dens_cdfs = cdf_matrix_from_density_matrix(dens_mat, grid)
    cdf_mat = np.vstack([dens_cdfs[i] if row is None else row for i, row in enumerate(cdf_rows)])
    fit_t, pred_t = (header.fit_time_s, header.predict_time_s) if timings is None else timings
    return score_matrices(dens_mat, cdf_mat, grid, y, fit_t, pred_t)
