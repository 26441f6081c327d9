"""Trainable neural density estimators.

Two heads share one small-MLP core with hand-coded backprop and Adam:
a Gaussian-mixture head (one hidden layer) trained on the negative mixture
log-likelihood, and a binned-softmax head (two hidden layers) trained with
cross-entropy over equal-width response bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .convert import BarDistribution, bar_to_density
from .dataset import Dataset
from .grid import EvalGrid, GridDensity, normalize_density, trapz_uniform

# log-sd floor on the standardized response scale; exp(floor) = 1e-3 train sds
LOG_SD_FLOOR = float(np.log(1e-3))

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8

_FULL_BATCH_LIMIT = 1024
_LARGE_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 300
    batch_size: int | None = None  # None: full batch up to 1024 rows, else 256
    val_fraction: float = 0.10
    patience: int = 30
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError("learning rate must be a positive finite number")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be at least 1 when given")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("validation fraction must lie inside (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")


@dataclass(frozen=True)
class MlpParams:
    """Trained network weights plus the input standardization they expect."""

    weights: tuple  # per-layer (fan_in, fan_out) matrices
    biases: tuple
    activation: str  # "relu"
    x_mean: np.ndarray
    x_scale: np.ndarray

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must pair up layer by layer")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape[1] != b.shape[0]:
                raise ValueError("bias length must match layer width")
            if i > 0 and self.weights[i - 1].shape[1] != W.shape[0]:
                raise ValueError("layer dimensions must chain")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("network parameters must be finite")

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]


@dataclass(frozen=True)
class MdnHead:
    """Mixture head: K weights, means, and log-sds on the standardized scale."""

    n_components: int
    y_mean: float
    y_scale: float
    log_sd_floor: float = LOG_SD_FLOOR

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("mixture needs at least one component")
        if not (np.isfinite(self.y_scale) and self.y_scale > 0):
            raise ValueError("response scale must be positive")


@dataclass(frozen=True)
class CatMlpHead:
    """Softmax-over-bins head; edges are equal-width over the train range."""

    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        object.__setattr__(self, "edges", e)
        if e.ndim != 1 or e.size < 3:
            raise ValueError("need at least 2 bins, so at least 3 edges")
        if not np.all(np.isfinite(e)) or np.diff(e).min() <= 0:
            raise ValueError("bin edges must be finite and strictly increasing")

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def _forward(weights, biases, X):
    """ReLU hidden layers, linear output; keeps intermediates for backprop."""
    pre = []
    acts = [X]
    a = X
    for W, b in zip(weights[:-1], biases[:-1]):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    out = a @ weights[-1] + biases[-1]
    return pre, acts, out


def _backward(weights, pre, acts, d_out):
    d_ws = [None] * len(weights)
    d_bs = [None] * len(weights)
    da = d_out
    for li in range(len(weights) - 1, -1, -1):
        d_ws[li] = acts[li].T @ da
        d_bs[li] = da.sum(axis=0)
        if li > 0:
            da = (da @ weights[li].T) * (pre[li - 1] > 0)
    return d_ws, d_bs


def _mdn_value_and_grads(weights, biases, X, y_std, k, log_sd_floor):
    """Mean negative mixture log-likelihood and its parameter gradients.

    The output layer stacks [logits | means | log-sds]; gradients flow through
    responsibilities, with the log-sd path zeroed wherever the floor binds.
    """
    pre, acts, out = _forward(weights, biases, X)
    n = X.shape[0]
    logits = out[:, :k]
    means = out[:, k : 2 * k]
    raw_log_sd = out[:, 2 * k :]
    log_sd = np.maximum(raw_log_sd, log_sd_floor)

    log_pi = logits - logsumexp(logits, axis=1, keepdims=True)
    z = (y_std[:, None] - means) * np.exp(-log_sd)
    comp = log_pi - log_sd - 0.5 * z * z - 0.5 * np.log(2.0 * np.pi)
    log_f = logsumexp(comp, axis=1)
    loss = -float(np.mean(log_f))

    resp = np.exp(comp - log_f[:, None])
    pi = np.exp(log_pi)
    d_logits = (pi - resp) / n
    d_means = -(resp * z * np.exp(-log_sd)) / n
    d_log_sd = -(resp * (z * z - 1.0)) / n
    d_log_sd[raw_log_sd < log_sd_floor] = 0.0

    d_out = np.concatenate([d_logits, d_means, d_log_sd], axis=1)
    d_ws, d_bs = _backward(weights, pre, acts, d_out)
    return loss, d_ws, d_bs


def _catmlp_value_and_grads(weights, biases, X, bin_idx):
    """Mean softmax cross-entropy over bins and its parameter gradients."""
    pre, acts, out = _forward(weights, biases, X)
    n = X.shape[0]
    lse = logsumexp(out, axis=1)
    rows = np.arange(n)
    loss = float(np.mean(lse - out[rows, bin_idx]))
    d_out = np.exp(out - lse[:, None]) / n
    d_out[rows, bin_idx] -= 1.0 / n
    d_ws, d_bs = _backward(weights, pre, acts, d_out)
    return loss, d_ws, d_bs


def _validation_split(n: int, config: TrainConfig):
    """Validation/train row split; the permutation is the seed's first draw."""
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(config.val_fraction * n)))
    return perm[:n_val], perm[n_val:], rng


def _standardize_features(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd, mu, sd


def _adam_step(params, grads, m, v, t, lr):
    c1 = 1.0 - _ADAM_B1**t
    c2 = 1.0 - _ADAM_B2**t
    for p, g, mi, vi in zip(params, grads, m, v):
        mi *= _ADAM_B1
        mi += (1.0 - _ADAM_B1) * g
        vi *= _ADAM_B2
        vi += (1.0 - _ADAM_B2) * g * g
        p -= lr * (mi / c1) / (np.sqrt(vi / c2) + _ADAM_EPS)


def _fit_network(X, target, layer_sizes, value_and_grads, config: TrainConfig):
    """Adam with early stopping on a held-out split; restores the best epoch.

    One generator seeds everything in a fixed order (split, init, batch
    shuffles), so a fixed seed reproduces the run exactly.
    """
    n = X.shape[0]
    va, tr, rng = _validation_split(n, config)
    Xs, mu, sd = _standardize_features(X)

    weights = [_glorot(rng, layer_sizes[i], layer_sizes[i + 1]) for i in range(len(layer_sizes) - 1)]
    biases = [np.zeros(layer_sizes[i + 1]) for i in range(len(layer_sizes) - 1)]
    m_w = [np.zeros_like(W) for W in weights]
    v_w = [np.zeros_like(W) for W in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]

    batch = config.batch_size
    if batch is None:
        batch = tr.size if n <= _FULL_BATCH_LIMIT else _LARGE_BATCH

    best_val = np.inf
    best_w = [W.copy() for W in weights]
    best_b = [b.copy() for b in biases]
    wait = 0
    t = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(tr.size)
        for start in range(0, tr.size, batch):
            rows = tr[order[start : start + batch]]
            loss, d_ws, d_bs = value_and_grads(weights, biases, Xs[rows], target[rows])
            if not np.isfinite(loss):
                raise ValueError(f"training loss became non-finite at epoch {epoch}")
            t += 1
            _adam_step(weights, d_ws, m_w, v_w, t, config.learning_rate)
            _adam_step(biases, d_bs, m_b, v_b, t, config.learning_rate)
        val_loss, _, _ = value_and_grads(weights, biases, Xs[va], target[va])
        if not np.isfinite(val_loss):
            raise ValueError(f"validation loss became non-finite at epoch {epoch}")
        if val_loss < best_val:
            best_val = val_loss
            best_w = [W.copy() for W in weights]
            best_b = [b.copy() for b in biases]
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                break

    params = MlpParams(tuple(best_w), tuple(best_b), "relu", mu, sd)
    return params, best_val


def mdn_fit(
    ds: Dataset,
    config: TrainConfig,
    n_components: int,
    hidden: int = 32,
) -> tuple[MlpParams, MdnHead]:
    """Train the mixture head: one hidden ReLU layer onto 3K mixture outputs.

    The response is standardized internally; densities are transformed back
    by the head. Early stopping watches the mixture NLL on the held-out split.
    """
    if n_components < 1:
        raise ValueError("mixture needs at least one component")
    if ds.n < 20:
        raise ValueError("network fit needs at least 20 rows")
    y = ds.response
    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if y_scale <= 0:
        y_scale = 1.0
    y_std = (y - y_mean) / y_scale

    sizes = (ds.d, hidden, 3 * n_components)

    def objective(weights, biases, Xb, yb):
        return _mdn_value_and_grads(weights, biases, Xb, yb, n_components, LOG_SD_FLOOR)

    params, _ = _fit_network(ds.features, y_std, sizes, objective, config)
    return params, MdnHead(n_components, y_mean, y_scale)


def _mdn_raw_outputs(params: MlpParams, head: MdnHead, X):
    Xs = (X - params.x_mean) / params.x_scale
    _, _, out = _forward(params.weights, params.biases, Xs)
    k = head.n_components
    log_pi = out[:, :k] - logsumexp(out[:, :k], axis=1, keepdims=True)
    means = out[:, k : 2 * k]
    log_sd = np.maximum(out[:, 2 * k :], head.log_sd_floor)
    return np.exp(log_pi), means, np.exp(log_sd)


def mdn_density_matrix(params: MlpParams, head: MdnHead, X: np.ndarray, grid: EvalGrid) -> np.ndarray:
    """Mixture densities on the grid, one normalized row per input row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params.n_inputs:
        raise ValueError(f"fit expects {params.n_inputs} features")
    pi, means, sds = _mdn_raw_outputs(params, head, X)
    z_grid = (grid.points - head.y_mean) / head.y_scale
    # (rows, components, grid): fine at benchmark sizes, K <= 5
    u = (z_grid[None, None, :] - means[:, :, None]) / sds[:, :, None]
    comp = np.exp(-0.5 * u * u) / (sds[:, :, None] * np.sqrt(2.0 * np.pi))
    dens = np.einsum("rk,rkg->rg", pi, comp) / head.y_scale
    area = trapz_uniform(dens, grid.dx)
    return dens / area[:, None]


def mdn_density(params: MlpParams, head: MdnHead, x: np.ndarray, grid: EvalGrid) -> GridDensity:
    row = mdn_density_matrix(params, head, np.asarray(x, dtype=float)[None, :], grid)[0]
    return GridDensity(grid, row)


def _bin_indices(y, edges):
    # equal-width bins; floor puts interior edges in the upper bin and the
    # clip makes the last bin right-inclusive
    width = edges[1] - edges[0]
    idx = np.floor((y - edges[0]) / width).astype(np.int64)
    return np.clip(idx, 0, edges.size - 2)


def catmlp_fit(
    ds: Dataset,
    config: TrainConfig,
    n_bins: int,
    hidden: int = 64,
) -> tuple[MlpParams, CatMlpHead]:
    """Train the binned head: two hidden ReLU layers onto bin logits.

    Bins are equal-width over [min(y), max(y)] with the last bin closed on
    the right; training minimizes softmax cross-entropy on the bin indices.
    """
    if n_bins < 2:
        raise ValueError("need at least 2 bins")
    if ds.n < 20:
        raise ValueError("network fit needs at least 20 rows")
    y = ds.response
    lo, hi = float(np.min(y)), float(np.max(y))
    if lo == hi:
        raise ValueError("all responses fall into a single bin; nothing to discriminate")
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = _bin_indices(y, edges)

    sizes = (ds.d, hidden, hidden, n_bins)
    params, _ = _fit_network(ds.features, idx, sizes, _catmlp_value_and_grads, config)
    return params, CatMlpHead(edges)


def catmlp_probabilities(params: MlpParams, head: CatMlpHead, X: np.ndarray) -> np.ndarray:
    """Per-row softmax bin probabilities."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params.n_inputs:
        raise ValueError(f"fit expects {params.n_inputs} features")
    Xs = (X - params.x_mean) / params.x_scale
    _, _, out = _forward(params.weights, params.biases, Xs)
    return np.exp(out - logsumexp(out, axis=1, keepdims=True))


def catmlp_density_matrix(params: MlpParams, head: CatMlpHead, X: np.ndarray, grid: EvalGrid) -> np.ndarray:
    probs = catmlp_probabilities(params, head, X)
    rows = np.empty((probs.shape[0], grid.points.size))
    for i in range(probs.shape[0]):
        rows[i] = bar_to_density(BarDistribution(head.edges, probs[i]), grid).values
    return rows


def catmlp_density(params: MlpParams, head: CatMlpHead, x: np.ndarray, grid: EvalGrid) -> GridDensity:
    row = catmlp_density_matrix(params, head, np.asarray(x, dtype=float)[None, :], grid)[0]
    return GridDensity(grid, row)
