"""Conversions from bar and quantile encodings onto the shared grid.

Bar distributions turn into densities by dividing mass by bin width at the
bin centers and interpolating; quantile functions go through their implied
CDF and a central-difference gradient. Both end in normalize_density, so the
output always integrates to one on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CdfCurve, EvalGrid, GridDensity, normalize_density

# Levels used by quantile-function exports: 0.005, 0.010, ..., 0.995.
# Defined as k * 0.005 so any IEEE-754 producer lands on identical doubles.
STANDARD_QUANTILE_LEVELS = np.arange(1, 200) * 0.005


@dataclass(frozen=True)
class BarDistribution:
    """Probability masses over contiguous bins given by their edges."""

    edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "masses", m)
        if e.ndim != 1 or m.ndim != 1 or e.size != m.size + 1 or m.size < 1:
            raise ValueError("need k+1 edges for k >= 1 masses")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(m))):
            raise ValueError("bar edges and masses must be finite")
        if np.diff(e).min() <= 0:
            raise ValueError("bar edges must be strictly increasing")
        if m.min() < 0:
            raise ValueError("bar masses must be non-negative")
        s = float(m.sum())
        if abs(s - 1.0) > 1e-6:
            raise ValueError(f"bar masses must sum to 1 within 1e-6, got {s:.8f}")


@dataclass(frozen=True)
class QuantileFunction:
    """Quantile values at strictly increasing levels inside (0, 1).

    Values may arrive unsorted (crossing quantiles happen in practice); the
    conversion below restores monotonicity by sorting them.
    """

    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "values", vals)
        if lv.ndim != 1 or vals.shape != lv.shape or lv.size < 2:
            raise ValueError("levels and values must be matching vectors of length >= 2")
        if not (np.all(np.isfinite(lv)) and np.all(np.isfinite(vals))):
            raise ValueError("quantile levels and values must be finite")
        if lv[0] <= 0.0 or lv[-1] >= 1.0 or np.diff(lv).min() <= 0:
            raise ValueError("quantile levels must be strictly increasing inside (0, 1)")


def bar_to_density(bar: BarDistribution, grid: EvalGrid) -> GridDensity:
    """Bar masses to a normalized grid density.

    Per-bin density mass/width sits at the bin center; values in between are
    linear interpolations and everything outside the outermost centers is 0.
    """
    widths = np.diff(bar.edges)
    centers = 0.5 * (bar.edges[:-1] + bar.edges[1:])
    dens = bar.masses / widths
    if centers.size == 1:
        # single bar: no centers to interpolate between, fall back to uniform mass on the bin
        vals = np.where((grid.points >= bar.edges[0]) & (grid.points <= bar.edges[1]), dens[0], 0.0)
    else:
        vals = np.interp(grid.points, centers, dens, left=0.0, right=0.0)
    return normalize_density(GridDensity(grid, vals))


def _monotone_cdf_knots(q: QuantileFunction):
    """Sorted (value, level) knots with ties collapsed to the highest level."""
    vals = np.sort(q.values, kind="stable")
    # run ends: for tied values the CDF jumps to the largest level of the run
    ends = np.flatnonzero(np.diff(vals, append=np.inf) != 0.0)
    return vals[ends], q.levels[ends]


def quantiles_to_cdf(q: QuantileFunction, grid: EvalGrid) -> CdfCurve:
    """CDF implied by a quantile function, interpolated onto the grid.

    Outside the span of the quantile values the curve is clamped hard to 0 on
    the left and 1 on the right, so no probability mass lives out there.
    """
    knots_v, knots_l = _monotone_cdf_knots(q)
    if knots_v.size < 2:
        raise ValueError("quantile values are all identical; no density exists on a grid")
    vals = np.interp(grid.points, knots_v, knots_l)
    vals[grid.points < knots_v[0]] = 0.0
    vals[grid.points > knots_v[-1]] = 1.0
    return CdfCurve(grid, vals)


def quantiles_to_density(q: QuantileFunction, grid: EvalGrid) -> GridDensity:
    """Quantile function to a normalized grid density.

    Route: sort values, interpolate (value, level) into a CDF on the grid,
    differentiate with central differences, clamp at zero, renormalize.
    """
    cdf = quantiles_to_cdf(q, grid)
    dens = np.gradient(cdf.values, grid.dx)
    return normalize_density(GridDensity(grid, np.maximum(dens, 0.0)))
