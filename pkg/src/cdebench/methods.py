"""Uniform estimator surface: every baseline behind one fit/predict registry.

A Method bundles a name, its default hyperparameters, an optional random
search space, and two adapters. The harness treats all entries identically;
"Oracle" is not listed here because it needs the generator, not a fit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import Dataset
from .flexcode import (
    fit_flexcode,
    fit_flexzboost,
    fit_quantile_tree,
    flexcode_predict_matrix,
    quantile_tree_predict_matrix,
)
from .grid import EvalGrid
from .neural import TrainConfig, catmlp_density_matrix, catmlp_fit, mdn_density_matrix, mdn_fit
from .parametric import (
    RidgeConfig,
    fit_gamma_glm,
    fit_gauss_hetero,
    fit_gauss_homo,
    fit_lognormal,
    fit_student_t,
    predict_parametric_matrix,
)

ORACLE_NAME = "Oracle"


@dataclass(frozen=True)
class Method:
    name: str
    defaults: dict
    search_space: dict | None
    _fit: Callable
    _predict: Callable

    @property
    def tunable(self) -> bool:
        return self.search_space is not None

    def fit(self, ds: Dataset, params: dict | None = None, seed: int = 0):
        merged = dict(self.defaults)
        if params:
            unknown = set(params) - set(self.defaults)
            if unknown:
                raise ValueError(f"unknown hyperparameters for {self.name}: {sorted(unknown)}")
            merged.update(params)
        return self._fit(ds, merged, seed)

    def density_matrix(self, model, X: np.ndarray, grid: EvalGrid) -> np.ndarray:
        return self._predict(model, X, grid)


def _parametric(name: str, fitter: Callable, **fixed) -> Method:
    ridge = RidgeConfig() if name.endswith("-Ridge") else None

    def fit(ds, params, seed):
        return fitter(ds, ridge=ridge, **fixed)

    return Method(name, {}, None, fit, predict_parametric_matrix)


def _mdn_fit(ds, p, seed):
    cfg = TrainConfig(learning_rate=p["lr"], epochs=p["epochs"], seed=seed)
    return mdn_fit(ds, cfg, n_components=p["components"], hidden=p["hidden"])


def _catmlp_fit(ds, p, seed):
    cfg = TrainConfig(learning_rate=p["lr"], epochs=p["epochs"], seed=seed)
    return catmlp_fit(ds, cfg, n_bins=p["bins"], hidden=p["hidden"])


def _always_fail(ds, params, seed):
    raise RuntimeError("this method fails by design, for failure-path tests")


_NEURAL_RATES = (0.005, 0.01, 0.02)
_NEURAL_EPOCHS = (300, 500, 800)

_METHODS = (
    _parametric("LinearGauss-Homo", fit_gauss_homo),
    _parametric("LinearGauss-Homo-Ridge", fit_gauss_homo),
    _parametric("LinearGauss-Hetero", fit_gauss_hetero),
    _parametric("LinearGauss-Hetero-Ridge", fit_gauss_hetero),
    _parametric("Student-t", fit_student_t),
    _parametric("Student-t-Ridge", fit_student_t),
    _parametric("LogNormal-Homo", fit_lognormal, hetero=False),
    _parametric("LogNormal-Homo-Ridge", fit_lognormal, hetero=False),
    _parametric("LogNormal-Hetero", fit_lognormal, hetero=True),
    _parametric("LogNormal-Hetero-Ridge", fit_lognormal, hetero=True),
    _parametric("Gamma-GLM", fit_gamma_glm),
    _parametric("Gamma-GLM-Ridge", fit_gamma_glm),
    Method(
        "FlexCode-RF",
        {},
        None,  # series length comes from its own 5-fold CV
        lambda ds, p, seed: fit_flexcode(ds, backend="forest", seed=seed),
        flexcode_predict_matrix,
    ),
    Method(
        "FlexZBoost",
        {},
        None,  # series length and sharpening exponent via internal CV
        lambda ds, p, seed: fit_flexzboost(ds, seed=seed),
        flexcode_predict_matrix,
    ),
    Method(
        "Quantile-Tree",
        {"rounds": 100, "depth": 4, "lr": 0.1},
        {"rounds": (50, 100, 200), "depth": (3, 4, 6), "lr": (0.05, 0.1, 0.2)},
        lambda ds, p, seed: fit_quantile_tree(ds, rounds=p["rounds"], depth=p["depth"], lr=p["lr"], seed=seed),
        quantile_tree_predict_matrix,
    ),
    Method(
        "MDN",
        {"components": 3, "hidden": 32, "lr": 0.01, "epochs": 300},
        {"components": (2, 3, 5), "hidden": (16, 32, 64), "lr": _NEURAL_RATES, "epochs": _NEURAL_EPOCHS},
        _mdn_fit,
        lambda model, X, grid: mdn_density_matrix(model[0], model[1], X, grid),
    ),
    Method(
        "CatMLP",
        {"bins": 50, "hidden": 64, "lr": 0.01, "epochs": 300},
        {"bins": (30, 50, 100), "hidden": (32, 64, 128), "lr": _NEURAL_RATES, "epochs": _NEURAL_EPOCHS},
        _catmlp_fit,
        lambda model, X, grid: catmlp_density_matrix(model[0], model[1], X, grid),
    ),
    Method("AlwaysFail", {}, None, _always_fail, lambda model, X, grid: None),
)

METHOD_REGISTRY = {m.name: m for m in _METHODS}

# every real estimator, i.e. the registry minus the deliberate failure probe
ESTIMATOR_NAMES = tuple(n for n in METHOD_REGISTRY if n != "AlwaysFail")


def get_method(name: str) -> Method:
    if name not in METHOD_REGISTRY:
        raise ValueError(f"unknown method {name!r}")
    return METHOD_REGISTRY[name]
