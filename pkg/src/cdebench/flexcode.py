"""Basis-expansion and quantile-grid density estimators on tree backends.

The expansion route regresses each cosine-basis coefficient of the mapped
response on the covariates, truncates the series at a CV-chosen length, and
projects the result back to a proper density. The quantile route fits one
pinball booster per level and differentiates the interpolated quantile curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convert import QuantileFunction, quantiles_to_density
from .dataset import Dataset, kfold_indices
from .grid import EvalGrid, GridDensity, make_eval_grid, normalize_density, trapz_uniform
from .scoring import cde_loss
from .trees import GbtModel, RegressionForest, fit_forest, fit_gbt, forest_predict, gbt_predict

ALPHA_GRID = np.linspace(0.5, 2.0, 16)

QUANTILE_TREE_LEVELS = np.arange(1, 50) * 0.02  # 0.02 .. 0.98

_FOREST_BACKEND = {"n_trees": 100, "max_depth": 8, "feature_fraction": 1.0 / 3.0}
_GBT_BACKEND = {"rounds": 100, "depth": 4, "lr": 0.1}


def basis_size_cap(n: int) -> int:
    return min(30, max(15, int(np.floor(np.sqrt(n)))))


@dataclass(frozen=True)
class CosineBasis:
    """phi_0 = 1, phi_i(z) = sqrt(2) cos(i pi z) on z in [0,1], where z is the
    response rescaled by the train min/max (clipped outside)."""

    n_basis: int
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.n_basis < 1:
            raise ValueError("need at least the constant basis function")
        if not (np.isfinite(self.y_min) and np.isfinite(self.y_max) and self.y_max > self.y_min):
            raise ValueError("basis needs a non-degenerate response range")

    def z_of(self, y: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(y, dtype=float) - self.y_min) / (self.y_max - self.y_min), 0.0, 1.0)

    def eval_z(self, z: np.ndarray) -> np.ndarray:
        """Basis matrix, one column per function, rows following z."""
        z = np.asarray(z, dtype=float)
        out = np.empty((z.size, self.n_basis))
        out[:, 0] = 1.0
        for i in range(1, self.n_basis):
            out[:, i] = np.sqrt(2.0) * np.cos(i * np.pi * z)
        return out


@dataclass(frozen=True)
class FlexcodeFit:
    basis: CosineBasis
    models: tuple  # coefficient regressors for i = 1 .. n_basis-1; beta_0 is 1
    alpha: float
    backend: str  # "forest" | "gbt"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("sharpening exponent must be positive")
        if len(self.models) != self.basis.n_basis - 1:
            raise ValueError("one regressor per non-constant basis function")


def _backend_fit(backend: str, X, t, seed: int):
    if backend == "forest":
        return fit_forest(X, t, seed, **_FOREST_BACKEND)
    if backend == "gbt":
        return fit_gbt(X, t, "squared", seed=seed, **_GBT_BACKEND)
    raise ValueError(f"unknown backend {backend!r}")


def _backend_predict(model, X) -> np.ndarray:
    if isinstance(model, RegressionForest):
        return forest_predict(model, X)
    if isinstance(model, GbtModel):
        return gbt_predict(model, X)
    raise TypeError(f"not a coefficient regressor: {type(model).__name__}")


def _coef_matrix(models, X: np.ndarray, n_basis: int) -> np.ndarray:
    B = np.ones((X.shape[0], n_basis))
    for i, model in enumerate(models[: n_basis - 1]):
        B[:, i + 1] = _backend_predict(model, X)
    return B


def _expansion_density_matrix(B: np.ndarray, basis: CosineBasis, grid: EvalGrid, alpha: float) -> np.ndarray:
    """Truncated series on the grid -> clamp -> sharpen -> renormalize."""
    span = basis.y_max - basis.y_min
    zg = (grid.points - basis.y_min) / span
    inside = (zg >= 0.0) & (zg <= 1.0)
    phi = basis.eval_z(np.clip(zg, 0.0, 1.0))[:, : B.shape[1]]
    raw = (B @ phi.T) / span  # Jacobian of the y -> z rescaling
    raw[:, ~inside] = 0.0
    np.maximum(raw, 0.0, out=raw)
    if alpha != 1.0:
        raw **= alpha
    integrals = trapz_uniform(raw, grid.dx)
    dead = integrals <= 0.0
    if np.any(dead):  # fully clipped row: fall back to uniform on the train range
        raw[dead] = np.where(inside, 1.0, 0.0)
        integrals = trapz_uniform(raw, grid.dx)
    return raw / integrals[:, None]


def _fit_coefficient_models(backend: str, X, y, basis: CosineBasis, seed: int):
    targets = basis.eval_z(basis.z_of(y))
    ss = np.random.SeedSequence(seed).generate_state(basis.n_basis - 1)
    return tuple(
        _backend_fit(backend, X, targets[:, i + 1], int(ss[i]) & 0x7FFFFFFF)
        for i in range(basis.n_basis - 1)
    )


def _cv_losses(ds: Dataset, backend: str, seed: int):
    """Per-candidate CV losses for the truncation length and, on the same
    fold predictions, for each sharpening exponent at the chosen length."""
    n = ds.n
    i_max = basis_size_cap(n)
    folds = kfold_indices(n, 5, np.random.default_rng(np.random.SeedSequence([seed, 5])))

    loss_i = np.zeros(i_max)  # index k holds candidate I = k+1
    fold_cache = []
    for fold_id, (tr, va) in enumerate(folds):
        y_tr = ds.response[tr]
        basis = CosineBasis(i_max, float(np.min(y_tr)), float(np.max(y_tr)))
        models = _fit_coefficient_models(backend, ds.features[tr], y_tr, basis, seed + 1000 * (fold_id + 1))
        B = _coef_matrix(models, ds.features[va], i_max)
        grid = make_eval_grid(y_tr)
        y_va = ds.response[va]
        fold_cache.append((B, basis, grid, y_va))
        for k in range(i_max):
            mat = _expansion_density_matrix(B[:, : k + 1], basis, grid, 1.0)
            loss_i[k] += cde_loss((mat, grid), y_va) * len(va)
    chosen_i = int(np.argmin(loss_i)) + 1

    loss_a = np.zeros(len(ALPHA_GRID))
    for B, basis, grid, y_va in fold_cache:
        for j, alpha in enumerate(ALPHA_GRID):
            mat = _expansion_density_matrix(B[:, :chosen_i], basis, grid, float(alpha))
            loss_a[j] += cde_loss((mat, grid), y_va) * len(y_va)
    return chosen_i, loss_i, loss_a


def fit_flexcode(ds: Dataset, backend: str = "forest", seed: int = 0) -> FlexcodeFit:
    """Cosine-expansion CDE; series length by 5-fold CV on the real loss."""
    if ds.n < 20:
        raise ValueError("expansion fit needs at least 20 rows")
    chosen_i, _, _ = _cv_losses(ds, backend, seed)
    y = ds.response
    basis = CosineBasis(chosen_i, float(np.min(y)), float(np.max(y)))
    models = _fit_coefficient_models(backend, ds.features, y, basis, seed)
    return FlexcodeFit(basis, models, 1.0, backend)


def fit_flexzboost(ds: Dataset, seed: int = 0) -> FlexcodeFit:
    """Boosted-backend expansion with a CV-chosen sharpening exponent."""
    if ds.n < 20:
        raise ValueError("expansion fit needs at least 20 rows")
    chosen_i, _, loss_a = _cv_losses(ds, "gbt", seed)
    alpha = float(ALPHA_GRID[int(np.argmin(loss_a))])
    y = ds.response
    basis = CosineBasis(chosen_i, float(np.min(y)), float(np.max(y)))
    models = _fit_coefficient_models("gbt", ds.features, y, basis, seed)
    return FlexcodeFit(basis, models, alpha, "gbt")


def flexcode_predict_matrix(fit: FlexcodeFit, X: np.ndarray, grid: EvalGrid) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B = _coef_matrix(fit.models, X, fit.basis.n_basis)
    return _expansion_density_matrix(B, fit.basis, grid, fit.alpha)


def flexcode_predict(fit: FlexcodeFit, x: np.ndarray, grid: EvalGrid) -> GridDensity:
    row = flexcode_predict_matrix(fit, np.asarray(x, dtype=float)[None, :], grid)[0]
    return normalize_density(GridDensity(grid, row))


def fit_quantile_tree(
    ds: Dataset,
    rounds: int = 100,
    depth: int = 4,
    lr: float = 0.1,
    seed: int = 0,
) -> tuple:
    """49 independent pinball boosters at levels 0.02 .. 0.98."""
    if ds.n < 50:
        raise ValueError("quantile-grid fit needs at least 50 rows")
    ss = np.random.SeedSequence(seed).generate_state(len(QUANTILE_TREE_LEVELS))
    return tuple(
        fit_gbt(ds.features, ds.response, "pinball", rounds, depth, lr, int(ss[k]) & 0x7FFFFFFF, tau=float(tau))
        for k, tau in enumerate(QUANTILE_TREE_LEVELS)
    )


def quantile_tree_values(models: tuple, X: np.ndarray) -> np.ndarray:
    """Raw per-level predictions, one column per level, before sorting."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty((X.shape[0], len(models)))
    for k, model in enumerate(models):
        out[:, k] = gbt_predict(model, X)
    if not np.all(np.isfinite(out)):
        raise ValueError("quantile model produced non-finite values")
    return out


def _quantile_row_density(values: np.ndarray, grid: EvalGrid) -> np.ndarray:
    if values.max() == values.min():
        # all levels collapsed to one constant: a spike at the nearest grid cell
        spike = np.zeros(grid.points.size)
        spike[int(np.argmin(np.abs(grid.points - values[0])))] = 1.0
        return normalize_density(GridDensity(grid, spike)).values
    q = QuantileFunction(QUANTILE_TREE_LEVELS, np.sort(values))
    return quantiles_to_density(q, grid).values


def quantile_tree_predict_matrix(models: tuple, X: np.ndarray, grid: EvalGrid) -> np.ndarray:
    vals = quantile_tree_values(models, X)
    out = np.empty((vals.shape[0], grid.points.size))
    for r in range(vals.shape[0]):
        out[r] = _quantile_row_density(vals[r], grid)
    return out


def quantile_tree_predict(models: tuple, x: np.ndarray, grid: EvalGrid) -> GridDensity:
    row = quantile_tree_predict_matrix(models, np.asarray(x, dtype=float)[None, :], grid)[0]
    return normalize_density(GridDensity(grid, row))
