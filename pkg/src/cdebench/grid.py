"""Shared evaluation grid, densities on it, and CDF curves.

Every estimator in this package reports a conditional density as values on a
single grid of 200 equally spaced points built from the training responses
with a 5% margin on each side. Metrics integrate on that grid with the
trapezoid rule, so the grid is the one piece of state all modules agree on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRID_SIZE = 200

# Two grids closer than this (relative to their scale) count as the same grid.
GRID_RTOL = 1e-9


def trapz_uniform(values, dx):
    """Trapezoid-rule integral over the last axis of uniformly spaced samples."""
    v = np.asarray(values, dtype=float)
    return (v.sum(axis=-1) - 0.5 * (v[..., 0] + v[..., -1])) * dx


def response_range(y):
    """max(y) - min(y), with max(|min|, 1) * 0.1 substituted for constant data."""
    y = np.asarray(y, dtype=float)
    r = float(y.max() - y.min())
    if r == 0.0:
        r = max(abs(float(y.min())), 1.0) * 0.1
    return r


@dataclass(frozen=True)
class EvalGrid:
    """200 strictly increasing, equally spaced evaluation points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.shape != (GRID_SIZE,):
            raise ValueError(f"grid needs exactly {GRID_SIZE} points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if pts[0] >= pts[-1]:
            raise ValueError("grid points must be strictly increasing")
        steps = np.diff(pts)
        # atol term: a few ulp of the endpoints, so large offsets don't trip the check
        atol = 16.0 * np.spacing(np.max(np.abs(pts)))
        if steps.min() <= 0 or not np.allclose(steps, steps[0], rtol=GRID_RTOL, atol=atol):
            raise ValueError("grid points must be equally spaced and increasing")

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (GRID_SIZE - 1)

    def same_as(self, other: "EvalGrid") -> bool:
        scale = max(abs(self.lo), abs(self.hi), 1.0)
        return bool(np.max(np.abs(self.points - other.points)) <= GRID_RTOL * scale)


def make_eval_grid(y_train) -> EvalGrid:
    """Grid spanning the training responses plus a 5% margin on each side.

    Constant responses have no scale of their own, so they get a symmetric
    window of half the substitute range (see response_range) per side.
    """
    y = np.asarray(y_train, dtype=float)
    if y.size == 0:
        raise ValueError("cannot build a grid from an empty response vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("training responses must be finite to build a grid")
    lo, hi = float(y.min()), float(y.max())
    if hi > lo:
        margin = 0.05 * (hi - lo)
    else:
        margin = 0.5 * response_range(y)
    return EvalGrid(np.linspace(lo - margin, hi + margin, GRID_SIZE))


@dataclass(frozen=True)
class GridDensity:
    """Density values on an EvalGrid.

    Values straight out of an estimator may be unnormalized or carry small
    negative noise; normalize_density is the single path to the clean form,
    and every public prediction ends with it.
    """

    grid: EvalGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (GRID_SIZE,):
            raise ValueError(f"density needs exactly {GRID_SIZE} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")

    def integral(self) -> float:
        return float(trapz_uniform(self.values, self.grid.dx))


def normalize_density(gd: GridDensity) -> GridDensity:
    """Clamp negatives to zero and rescale to unit trapezoid integral."""
    v = np.maximum(gd.values, 0.0)
    z = float(trapz_uniform(v, gd.grid.dx))
    if z <= 0.0:
        raise ValueError("density is zero everywhere after clamping, nothing to normalize")
    return GridDensity(gd.grid, v / z)


def density_at(gd: GridDensity, y):
    """Density at arbitrary points: linear interpolation, zero outside the grid."""
    return np.interp(np.asarray(y, dtype=float), gd.grid.points, gd.values, left=0.0, right=0.0)


@dataclass(frozen=True)
class CdfCurve:
    """A CDF sampled on an EvalGrid: non-decreasing, within [0, 1 + 1e-9]."""

    grid: EvalGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (GRID_SIZE,):
            raise ValueError(f"cdf needs exactly {GRID_SIZE} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("cdf values must be finite")
        if v[0] < -1e-9 or v[-1] > 1.0 + 1e-9:
            raise ValueError("cdf values must start at >= 0 and end at <= 1")
        if np.diff(v).min() < -1e-12:
            raise ValueError("cdf values must be non-decreasing")


def density_to_cdf(gd: GridDensity) -> CdfCurve:
    """Cumulative trapezoid integral of a normalized density."""
    z = gd.integral()
    if abs(z - 1.0) > 1e-6:
        raise ValueError(f"density integrates to {z:.8f}; normalize before building a CDF")
    v = gd.values
    dx = gd.grid.dx
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * dx)])
    return CdfCurve(gd.grid, cum / cum[-1])


def cdf_at(c: CdfCurve, y):
    """CDF at arbitrary points; clamps to the end values outside the grid."""
    return np.interp(np.asarray(y, dtype=float), c.grid.points, c.values)


def cdf_quantile(c: CdfCurve, level: float) -> float:
    """Smallest grid location where the CDF reaches `level`.

    Linear inverse interpolation between grid points; on a flat segment the
    left endpoint is returned. Levels outside the curve's actual span clamp
    to the grid ends.
    """
    if not (0.0 < level < 1.0):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    v = c.values
    pts = c.grid.points
    idx = int(np.searchsorted(v, level, side="left"))
    if idx == 0:
        return float(pts[0])
    if idx >= GRID_SIZE:
        return float(pts[-1])
    vi = float(v[idx])
    if vi <= level:
        # exact hit: this is the left end of any flat run at this height
        return float(pts[idx])
    v0 = float(v[idx - 1])
    t = (level - v0) / (vi - v0)
    return float(pts[idx - 1] + t * (pts[idx] - pts[idx - 1]))
