"""Synthetic generators with known conditional densities.

Three registry entries cover the harness's self-checks: a heteroscedastic
linear-Gaussian generator, a covariate-dependent two-component mixture, and
a quasi-discrete generator whose response sits on a few jittered atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import comb

from .dataset import Dataset
from .grid import EvalGrid

POOL_SIZE = 40_000

# heteroscedastic generator: y = b0 + x.b + exp((g0 + x.g)/2) eps, x ~ N(0,1)^3
HETERO_BETA = np.array([0.5, 1.0, -1.0, 0.5])
HETERO_GAMMA = np.array([-0.3, 0.4, -0.3, 0.2])

# two-component mixture: weight, both means, and both scales move with x
_MIX_SEP = 1.3
_MIX_TREND = 0.25

# quasi-discrete generator: Binomial(4, p(x)) atoms plus a small jitter
DISCRETE_TRIALS = 4
DISCRETE_JITTER = 0.05
_DISCRETE_COEF = np.array([0.9, -0.6])


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


@dataclass(frozen=True)
class SyntheticDgp:
    """A named generator paired with its exact conditional density."""

    name: str
    n_features: int
    code: int  # stable seed component, independent of registry order
    _sampler: Callable
    _density: Callable

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        X, y = self._sampler(n, rng)
        return Dataset(X, y, tuple(f"x{i}" for i in range(self.n_features)))

    def density_matrix(self, X: np.ndarray, grid: EvalGrid) -> np.ndarray:
        """True f(y|x) sampled on the grid, one row per input row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"generator expects {self.n_features} features")
        return self._density(X, grid.points)


def _gauss_rows(pts, mu, sd):
    z = (pts[None, :] - mu[:, None]) / sd[:, None]
    return np.exp(-0.5 * z * z) / (sd[:, None] * np.sqrt(2.0 * np.pi))


def hetero_moments(X):
    """Conditional mean and sd of the heteroscedastic generator."""
    mu = HETERO_BETA[0] + X @ HETERO_BETA[1:]
    sd = np.exp(0.5 * (HETERO_GAMMA[0] + X @ HETERO_GAMMA[1:]))
    return mu, sd


def _hetero_sample(n, rng):
    X = rng.normal(size=(n, 3))
    mu, sd = hetero_moments(X)
    return X, mu + sd * rng.normal(size=n)


def _hetero_density(X, pts):
    mu, sd = hetero_moments(X)
    return _gauss_rows(pts, mu, sd)


def mixture_components(X):
    """Weight, means, and scales of the bimodal generator at each x."""
    x = X[:, 0]
    w = 0.3 + 0.4 * _sigmoid(1.5 * x)
    mu_lo = -_MIX_SEP + _MIX_TREND * x
    mu_hi = _MIX_SEP + _MIX_TREND * x
    sd_lo = 0.30 * np.exp(0.08 * x)
    sd_hi = 0.40 * np.exp(-0.08 * x)
    return w, mu_lo, mu_hi, sd_lo, sd_hi


def _bimodal_sample(n, rng):
    X = rng.uniform(-2.0, 2.0, size=(n, 1))
    w, mu_lo, mu_hi, sd_lo, sd_hi = mixture_components(X)
    hi = rng.random(n) < w
    mu = np.where(hi, mu_hi, mu_lo)
    sd = np.where(hi, sd_hi, sd_lo)
    return X, mu + sd * rng.normal(size=n)


def _bimodal_density(X, pts):
    w, mu_lo, mu_hi, sd_lo, sd_hi = mixture_components(X)
    lo = _gauss_rows(pts, mu_lo, sd_lo)
    hi = _gauss_rows(pts, mu_hi, sd_hi)
    return (1.0 - w)[:, None] * lo + w[:, None] * hi


def discrete_atom_weights(X):
    """Binomial pmf over the atoms {0..4}, one row per input row."""
    p = _sigmoid(X @ _DISCRETE_COEF)
    k = np.arange(DISCRETE_TRIALS + 1)
    return (
        comb(DISCRETE_TRIALS, k)[None, :]
        * p[:, None] ** k[None, :]
        * (1.0 - p[:, None]) ** (DISCRETE_TRIALS - k)[None, :]
    )


def _discrete_sample(n, rng):
    X = rng.normal(size=(n, 2))
    p = _sigmoid(X @ _DISCRETE_COEF)
    k = rng.binomial(DISCRETE_TRIALS, p)
    return X, k + DISCRETE_JITTER * rng.normal(size=n)


def _discrete_density(X, pts):
    weights = discrete_atom_weights(X)
    k = np.arange(DISCRETE_TRIALS + 1)
    z = (pts[None, :] - k[:, None]) / DISCRETE_JITTER
    kernels = np.exp(-0.5 * z * z) / (DISCRETE_JITTER * np.sqrt(2.0 * np.pi))
    return weights @ kernels


DGP_REGISTRY = {
    d.name: d
    for d in (
        SyntheticDgp("hetero-gauss", 3, 1, _hetero_sample, _hetero_density),
        SyntheticDgp("bimodal", 1, 2, _bimodal_sample, _bimodal_density),
        SyntheticDgp("quasi-discrete", 2, 3, _discrete_sample, _discrete_density),
    )
}


def synthetic_pool(name: str, master_seed: int, size: int = POOL_SIZE) -> Dataset:
    """The fixed row pool a benchmark run treats as the named dataset."""
    if name not in DGP_REGISTRY:
        raise ValueError(f"unknown synthetic dataset {name!r}")
    dgp = DGP_REGISTRY[name]
    rng = np.random.default_rng([master_seed, dgp.code])
    return dgp.sample(size, rng)
