"""Parametric distributional regression families.

Six families share a backbone: standardize features, append an intercept,
fit by least squares or a joint likelihood, and fold the standardization
back into raw-scale coefficients so a fit object can be applied to new rows
directly. Ridge variants pick their penalty by closed-form leave-one-out CV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .dataset import Dataset
from .grid import EvalGrid, GridDensity, normalize_density, response_range, trapz_uniform

DEFAULT_RIDGE_LAMBDAS = np.logspace(-4.0, 4.0, 20)

# scale parameters never collapse below this multiple of the response range
SCALE_FLOOR_FRACTION = 1e-8

NU_LO, NU_HI = 2.01, 200.0

_LINPRED_CLIP = 60.0  # keeps exp(x@gamma) finite


def _default_lambdas():
    return DEFAULT_RIDGE_LAMBDAS.copy()


@dataclass(frozen=True)
class RidgeConfig:
    """Penalty grid for ridge variants: 20 log-spaced values on [1e-4, 1e4]."""

    lambdas: np.ndarray = field(default_factory=_default_lambdas)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        object.__setattr__(self, "lambdas", lam)
        if lam.shape != (20,) or not np.all(np.isfinite(lam)):
            raise ValueError("ridge grid must hold exactly 20 finite values")
        logs = np.log10(lam)
        if abs(logs[0] + 4.0) > 1e-9 or abs(logs[-1] - 4.0) > 1e-9:
            raise ValueError("ridge grid must span [1e-4, 1e4]")
        if np.max(np.abs(np.diff(logs) - (logs[-1] - logs[0]) / 19.0)) > 1e-9:
            raise ValueError("ridge grid must be log-spaced")


@dataclass(frozen=True)
class GaussHomoFit:
    beta: np.ndarray  # raw-scale, intercept first
    sigma2: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.beta)) and np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError("Gaussian fit needs finite beta and sigma2 > 0")


@dataclass(frozen=True)
class GaussHeteroFit:
    beta: np.ndarray
    gamma: np.ndarray
    converged: bool = True

    def __post_init__(self):
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.gamma))):
            raise ValueError("heteroscedastic fit must be finite")
        if self.beta.shape != self.gamma.shape:
            raise ValueError("beta and gamma must match in length")


@dataclass(frozen=True)
class StudentTFit:
    beta: np.ndarray
    nu: float
    sigma: float

    def __post_init__(self):
        if not (NU_LO - 1e-9 <= self.nu <= NU_HI + 1e-9):
            raise ValueError(f"nu must lie in [{NU_LO}, {NU_HI}]")
        if not (np.all(np.isfinite(self.beta)) and self.sigma > 0):
            raise ValueError("Student-t fit needs finite beta and sigma > 0")


@dataclass(frozen=True)
class LogNormalFit:
    """Gaussian regression of log(y + shift_c); scale is a constant sigma or,
    for the heteroscedastic variant, log-variance coefficients gamma."""

    beta: np.ndarray
    shift_c: float
    sigma: float | None = None
    gamma: np.ndarray | None = None

    def __post_init__(self):
        if self.shift_c < 0 or not np.isfinite(self.shift_c):
            raise ValueError("shift must be finite and >= 0")
        if (self.sigma is None) == (self.gamma is None):
            raise ValueError("exactly one of sigma (homo) or gamma (hetero) is required")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def hetero(self) -> bool:
        return self.gamma is not None


@dataclass(frozen=True)
class GammaGlmFit:
    beta: np.ndarray  # log-mean coefficients
    shape_a: float
    shift_c: float

    def __post_init__(self):
        if not (self.shape_a > 0 and np.isfinite(self.shape_a)):
            raise ValueError("shape must be positive")
        if self.shift_c < 0:
            raise ValueError("shift must be >= 0")


# ---------------------------------------------------------------------------
# shared linear-algebra backbone


def _check_size(n: int, d: int, ridged: bool):
    if not ridged and n <= d + 1:
        raise ValueError(f"unridged parametric fit needs n > d + 1 (got n={n}, d={d})")


def _standardized_design(X: np.ndarray):
    """Intercept column plus feature columns scaled to zero mean, unit sd."""
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    Z1 = np.empty((X.shape[0], X.shape[1] + 1))
    Z1[:, 0] = 1.0
    Z1[:, 1:] = (X - mu) / sd
    return Z1, mu, sd


def _fold_back(b: np.ndarray, mu: np.ndarray, sd: np.ndarray) -> np.ndarray:
    beta = np.empty_like(b)
    beta[1:] = b[1:] / sd
    beta[0] = b[0] - float(np.dot(b[1:], mu / sd))
    return beta


def _linpred(beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    return beta[0] + X @ beta[1:]


def _ols(Z1: np.ndarray, y: np.ndarray) -> np.ndarray:
    if np.linalg.matrix_rank(Z1) < Z1.shape[1]:
        raise ValueError("design matrix is rank-deficient; use a ridge variant")
    b, *_ = np.linalg.lstsq(Z1, y, rcond=None)
    return b


def _penalized_solve(Z1: np.ndarray, y: np.ndarray, lam: float):
    """Coefficients, fitted values and hat diagonal at one penalty value.

    The intercept column is never penalized.
    """
    d1 = Z1.shape[1]
    D = np.eye(d1)
    D[0, 0] = 0.0
    M = Z1.T @ Z1 + lam * D
    b = np.linalg.solve(M, Z1.T @ y)
    h = np.einsum("ij,ji->i", Z1, np.linalg.solve(M, Z1.T))
    return b, Z1 @ b, h


def ridge_loo_errors(X: np.ndarray, y: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    """Closed-form leave-one-out SSE for each penalty value.

    Uses the hat-diagonal identity; entries where any h_ii reaches 1 come
    back as +inf since that fold's refit is not defined by the closed form.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Z1, _, _ = _standardized_design(X)
    out = np.empty(len(lambdas))
    for k, lam in enumerate(lambdas):
        _, fitted, h = _penalized_solve(Z1, y, float(lam))
        if np.any(h >= 1.0 - 1e-12):
            out[k] = np.inf
            continue
        r = (y - fitted) / (1.0 - h)
        out[k] = float(r @ r)
    return out


def ridge_fit(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Raw-scale ridge coefficients (intercept first) at a fixed penalty."""
    X = np.asarray(X, dtype=float)
    Z1, mu, sd = _standardized_design(X)
    b, _, _ = _penalized_solve(Z1, np.asarray(y, dtype=float), float(lam))
    return _fold_back(b, mu, sd)


def ridge_solve_loo(X: np.ndarray, y: np.ndarray, config: RidgeConfig):
    """Fit at the LOO-optimal penalty; ties resolve to the smaller lambda."""
    errs = ridge_loo_errors(X, y, config.lambdas)
    if not np.any(np.isfinite(errs)):
        raise ValueError("leave-one-out failed at every penalty value")
    best = int(np.argmin(errs))  # argmin takes the first, i.e. smallest, lambda
    lam = float(config.lambdas[best])
    return ridge_fit(X, y, lam), lam


def _mean_coefficients(X: np.ndarray, y: np.ndarray, ridge: RidgeConfig | None):
    """Least-squares backbone shared by every family.

    Returns raw-scale beta, residuals, and the chosen lambda (0 unridged).
    The response is centered internally so downstream residual statistics do
    not pick up float noise when a constant is added to y.
    """
    _check_size(len(y), X.shape[1], ridge is not None)
    y_bar = float(np.mean(y))
    yc = y - y_bar
    if ridge is None:
        Z1, mu, sd = _standardized_design(X)
        beta = _fold_back(_ols(Z1, yc), mu, sd)
        lam = 0.0
    else:
        beta, lam = ridge_solve_loo(X, yc, ridge)
    beta[0] += y_bar
    return beta, y - _linpred(beta, X), lam


def _scale_floor(y: np.ndarray) -> float:
    return SCALE_FLOOR_FRACTION * response_range(y)


def fit_gauss_homo(ds: Dataset, ridge: RidgeConfig | None = None) -> GaussHomoFit:
    """Linear-Gaussian regression with constant variance.

    sigma2 is RSS/(n - d - 1) for the plain fit and RSS/n under ridge, where
    the effective degrees of freedom are not the raw parameter count.
    """
    X, y = ds.features, ds.response
    beta, resid, _ = _mean_coefficients(X, y, ridge)
    rss = float(resid @ resid)
    denom = len(y) if ridge is not None else len(y) - ds.d - 1
    sigma2 = max(rss / denom, _scale_floor(y) ** 2)
    return GaussHomoFit(beta, sigma2)


def _hetero_objective(theta: np.ndarray, Z1: np.ndarray, y: np.ndarray, lam: float):
    d1 = Z1.shape[1]
    beta, gamma = theta[:d1], theta[d1:]
    s = np.clip(Z1 @ gamma, -_LINPRED_CLIP, _LINPRED_CLIP)
    r = y - Z1 @ beta
    w = np.exp(-s)
    nll = 0.5 * float(np.sum(s + r * r * w))
    g_beta = -(Z1.T @ (r * w))
    g_gamma = 0.5 * (Z1.T @ (1.0 - r * r * w))
    if lam > 0.0:
        nll += lam * (float(beta[1:] @ beta[1:]) + float(gamma[1:] @ gamma[1:]))
        g_beta[1:] += 2.0 * lam * beta[1:]
        g_gamma[1:] += 2.0 * lam * gamma[1:]
    return nll, np.concatenate([g_beta, g_gamma])


def fit_gauss_hetero(ds: Dataset, ridge: RidgeConfig | None = None) -> GaussHeteroFit:
    """Joint Gaussian MLE of a linear mean and log-linear variance.

    L-BFGS-B with the analytic gradient, warm-started from OLS for the mean
    and a least-squares fit of log squared residuals for the variance. The
    ridge variant reuses the penalty selected by the mean model's LOO path
    and applies it to both coefficient blocks.
    """
    X, y = ds.features, ds.response
    _check_size(len(y), X.shape[1], ridge is not None)
    n = len(y)
    y_bar = float(np.mean(y))
    yc = y - y_bar

    Z1, mu, sd = _standardized_design(X)
    if ridge is None:
        b0 = _ols(Z1, yc)
        lam = 0.0
    else:
        errs = ridge_loo_errors(X, yc, ridge.lambdas)
        lam = float(ridge.lambdas[int(np.argmin(errs))])
        b0, _, _ = _penalized_solve(Z1, yc, lam)
    r0 = yc - Z1 @ b0
    log_r2 = np.log(np.maximum(r0 * r0, 1e-30))
    if ridge is None:
        g0 = _ols(Z1, log_r2)
    else:
        g0, _, _ = _penalized_solve(Z1, log_r2, lam)

    best = {"f": np.inf, "x": None}

    def fun(theta):
        f, g = _hetero_objective(theta, Z1, yc, lam)
        if f < best["f"]:
            best["f"], best["x"] = f, theta.copy()
        return f, g

    x0 = np.concatenate([b0, g0])
    res = minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 500, "maxfun": 3000, "gtol": 1e-6 * n, "ftol": 1e-14},
    )
    theta = res.x if res.fun <= best["f"] else best["x"]
    converged = bool(res.success)

    d1 = Z1.shape[1]
    beta = _fold_back(theta[:d1], mu, sd)
    beta[0] += y_bar
    gamma = _fold_back(theta[d1:], mu, sd)
    return GaussHeteroFit(beta, gamma, converged)


def hetero_grad_norm(fit: GaussHeteroFit, ds: Dataset) -> float:
    """Max-norm of the unpenalized likelihood gradient at a fit; diagnostics."""
    X, y = ds.features, ds.response
    Z1 = np.column_stack([np.ones(len(y)), X])
    theta = np.concatenate([fit.beta, fit.gamma])
    _, g = _hetero_objective(theta, Z1, y, 0.0)
    return float(np.max(np.abs(g)))


def _t_logpdf_std(z: np.ndarray, nu: float) -> np.ndarray:
    # standardized Student-t log-density, written out to stay vectorizable
    return (
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * math.log(nu * math.pi)
        - 0.5 * (nu + 1.0) * np.log1p(z * z / nu)
    )


def student_scale(mean_sq_resid: float, nu: float) -> float:
    """Moment-matching scale: sqrt(m2 * (nu - 2) / nu), valid for nu > 2."""
    return math.sqrt(mean_sq_resid * (nu - 2.0) / nu)


def _profile_nu(resid: np.ndarray, floor: float):
    m2 = float(np.mean(resid * resid))

    def nll(log_nu: float) -> float:
        nu = math.exp(log_nu)
        sigma = max(student_scale(m2, nu) if m2 > 0 else 0.0, floor)
        return -float(np.sum(_t_logpdf_std(resid / sigma, nu))) + len(resid) * math.log(sigma)

    lo, hi = math.log(NU_LO), math.log(NU_HI)
    grid = np.linspace(lo, hi, 60)
    vals = np.array([nll(v) for v in grid])
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]

    # golden-section refinement inside the bracketing grid cell pair
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = nll(c), nll(d)
    while b - a > 1e-10:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = nll(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = nll(d)
    log_nu = (a + b) / 2.0
    nu = min(max(math.exp(log_nu), NU_LO), NU_HI)
    sigma = max(student_scale(m2, nu) if m2 > 0 else 0.0, floor)
    return nu, sigma


def fit_student_t(ds: Dataset, ridge: RidgeConfig | None = None) -> StudentTFit:
    """Linear mean with Student-t residuals; nu by profile likelihood on
    [2.01, 200], sigma from the second-moment identity at the chosen nu."""
    X, y = ds.features, ds.response
    beta, resid, _ = _mean_coefficients(X, y, ridge)
    nu, sigma = _profile_nu(resid, _scale_floor(y))
    return StudentTFit(beta, nu, sigma)


def response_shift(y: np.ndarray) -> float:
    """Shift that makes the response strictly positive: 0 when it already is,
    otherwise -min(y) plus one percent of the response range."""
    lo = float(np.min(y))
    if lo > 0.0:
        return 0.0
    return max(0.0, -lo + 0.01 * response_range(y))


def fit_lognormal(ds: Dataset, hetero: bool = False, ridge: RidgeConfig | None = None) -> LogNormalFit:
    """Gaussian regression on log(y + c) with the positivity shift c."""
    X, y = ds.features, ds.response
    c = response_shift(y)
    ly = np.log(y + c)
    log_ds = Dataset(X, ly, ds.feature_names)
    if hetero:
        sub = fit_gauss_hetero(log_ds, ridge)
        return LogNormalFit(sub.beta, c, gamma=sub.gamma)
    sub = fit_gauss_homo(log_ds, ridge)
    return LogNormalFit(sub.beta, c, sigma=math.sqrt(sub.sigma2))


def fit_gamma_glm(ds: Dataset, ridge: RidgeConfig | None = None) -> GammaGlmFit:
    """Gamma regression with log link, fitted on the log scale.

    The log-mean coefficients come from least squares of log(y + c) on x and
    the shape from the inverse variance of those log-scale residuals; this is
    a moment approximation, not the full Gamma likelihood.
    """
    X, y = ds.features, ds.response
    c = response_shift(y)
    ly = np.log(y + c)
    beta, resid, _ = _mean_coefficients(X, ly, ridge)
    v = float(np.var(resid))
    a = min(1.0 / v, 1e6) if v > 0 else 1e6
    return GammaGlmFit(beta, a, c)


# ---------------------------------------------------------------------------
# prediction


def _gauss_logpdf(t: np.ndarray, mean: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    z = (t - mean) / sigma
    return -0.5 * z * z - np.log(sigma) - 0.5 * math.log(2.0 * math.pi)


def predict_parametric_matrix(fit, X: np.ndarray, grid: EvalGrid) -> np.ndarray:
    """Rows of normalized grid densities, one per covariate row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(fit.beta) - 1:
        raise ValueError(f"fit expects {len(fit.beta) - 1} features, got {X.shape[1]}")
    t = grid.points[None, :]

    if isinstance(fit, GaussHomoFit):
        m = _linpred(fit.beta, X)[:, None]
        vals = np.exp(_gauss_logpdf(t, m, math.sqrt(fit.sigma2)))
    elif isinstance(fit, GaussHeteroFit):
        m = _linpred(fit.beta, X)[:, None]
        s = np.clip(_linpred(fit.gamma, X), -_LINPRED_CLIP, _LINPRED_CLIP)[:, None]
        vals = np.exp(_gauss_logpdf(t, m, np.exp(0.5 * s)))
    elif isinstance(fit, StudentTFit):
        m = _linpred(fit.beta, X)[:, None]
        vals = np.exp(_t_logpdf_std((t - m) / fit.sigma, fit.nu)) / fit.sigma
    elif isinstance(fit, LogNormalFit):
        m = _linpred(fit.beta, X)[:, None]
        if fit.hetero:
            s = np.clip(_linpred(fit.gamma, X), -_LINPRED_CLIP, _LINPRED_CLIP)[:, None]
            sigma = np.exp(0.5 * s)
        else:
            sigma = np.full((X.shape[0], 1), fit.sigma)
        shifted = t + fit.shift_c
        pos = shifted > 0.0
        lt = np.log(np.where(pos, shifted, 1.0))
        vals = np.where(pos, np.exp(_gauss_logpdf(lt, m, sigma)) / np.where(pos, shifted, 1.0), 0.0)
    elif isinstance(fit, GammaGlmFit):
        a = fit.shape_a
        log_mu = np.clip(_linpred(fit.beta, X), -_LINPRED_CLIP, _LINPRED_CLIP)[:, None]
        log_scale = log_mu - math.log(a)
        shifted = t + fit.shift_c
        pos = shifted > 0.0
        lt = np.log(np.where(pos, shifted, 1.0))
        logpdf = (a - 1.0) * lt - np.where(pos, shifted, 1.0) * np.exp(-log_scale) - gammaln(a) - a * log_scale
        vals = np.where(pos, np.exp(logpdf), 0.0)
    else:
        raise TypeError(f"unknown fit type {type(fit).__name__}")

    integrals = trapz_uniform(vals, grid.dx)
    if np.any(integrals <= 0.0) or not np.all(np.isfinite(integrals)):
        raise ValueError("predictive density vanished or overflowed on the grid")
    return vals / integrals[:, None]


def predict_parametric(fit, x: np.ndarray, grid: EvalGrid) -> GridDensity:
    row = predict_parametric_matrix(fit, np.asarray(x, dtype=float)[None, :], grid)[0]
    return normalize_density(GridDensity(grid, row))
