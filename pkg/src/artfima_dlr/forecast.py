"""Posterior-predictive forecasts, forecast scores, DIC and rolling evaluation."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import special

from .errors import ArtfimaDlrError, DomainError, EvaluationError
from .model import Family, ModelSpec, ParamVector, natural_from_array
from .sampler import ChainResult, SamplerSettings
from .spectral import autocovariance
from .timedomain import levinson_predict

__all__ = [
    "ForecastTable",
    "DicResult",
    "CvResult",
    "conditional_forecast",
    "conditional_forecast_path",
    "thin_indices",
    "posterior_predictive",
    "gaussian_mixture_logpdf",
    "lpds",
    "rmse",
    "crps",
    "dic",
    "rolling_cv",
]

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 2048


def conditional_forecast_path(z, theta: ParamVector, spec: ModelSpec, h_max: int,
                              window_W: int | None = None):
    """Means and variances of eta_{T+1..T+h_max} given the last ``window_W`` values of ``z``."""
    z = np.asarray(z, dtype=float).ravel()
    if h_max < 1:
        raise DomainError("h must be >= 1")
    W = min(z.size, DEFAULT_WINDOW) if window_W is None else int(window_W)
    if not 0 <= W <= z.size:
        raise DomainError(f"window_W must lie in [0, {z.size}]")
    gamma = autocovariance(theta, spec, W + h_max - 1)
    return levinson_predict(gamma, z[z.size - W:], h_max)


def conditional_forecast(z, theta: ParamVector, spec: ModelSpec, h: int,
                         window_W: int | None = None) -> tuple[float, float]:
    """Gaussian conditional (mean, variance) of eta_{T+h}."""
    mean, var = conditional_forecast_path(z, theta, spec, h, window_W)
    return float(mean[-1]), float(var[-1])


def thin_indices(n: int, M: int) -> np.ndarray:
    """M uniformly strided indices into n draws."""
    if not 1 <= M <= n:
        raise DomainError(f"need 1 <= M <= {n} draws, got M={M}")
    return (np.arange(M) * n) // M


@dataclass
class ForecastTable:
    """Per-horizon posterior-predictive summaries.

    ``means``/``variances`` (H x M) are the per-draw Gaussian conditional
    moments and ``draws`` (H x M) one predictive sample from each.
    """

    horizons: np.ndarray
    point: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    draws: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    level: float = 0.95
    scores: dict | None = None

    @property
    def M(self) -> int:
        return self.draws.shape[1]

    def log_predictive_density(self, truth) -> np.ndarray:
        """log p(y_{T+h} | data) per horizon as a mixture over the M draws."""
        truth = np.asarray(truth, dtype=float).ravel()
        return np.array([gaussian_mixture_logpdf(truth[i], self.means[i], self.variances[i])
                         for i in range(truth.size)])

    def score(self, truth) -> dict:
        """Per-horizon log density, squared error and CRPS for the realized values."""
        truth = np.asarray(truth, dtype=float).ravel()
        n = truth.size
        self.scores = {
            "log_density": self.log_predictive_density(truth),
            "sq_error": (truth - self.point[:n]) ** 2,
            "crps": np.array([crps(self.draws[i], truth[i]) for i in range(n)]),
        }
        return self.scores


def posterior_predictive(
    y,
    X,
    X_future,
    chain: ChainResult,
    spec: ModelSpec,
    M: int = 900,
    window_W: int | None = None,
    level: float = 0.95,
    seed: int = 0,
    h_max: int | None = None,
) -> ForecastTable:
    """Monte Carlo posterior predictive for horizons 1..h_max.

    The model is ``y - mean(y) = (X - mean(X)) beta + eta`` with training
    means, so ``y_hat = mean(y) + (x_future - mean(X)) beta + E[eta | past]``.
    """
    y = np.asarray(y, dtype=float).ravel()
    T = y.size
    X = np.zeros((T, 0)) if X is None else np.asarray(X, dtype=float).reshape(T, -1)
    if X.shape[1] != spec.m:
        raise DomainError(f"spec has m={spec.m} but X has {X.shape[1]} columns")
    if h_max is None:
        if X_future is None:
            raise DomainError("give X_future or h_max")
        H = len(X_future)
    else:
        H = int(h_max)
    if H < 1:
        raise DomainError("h_max must be >= 1")
    if spec.m:
        if X_future is None:
            raise DomainError("X_future is required when the model has regressors")
        X_future = np.asarray(X_future, dtype=float).reshape(-1, spec.m)
        if X_future.shape[0] < H:
            raise DomainError("X_future must have at least h_max rows")
    else:
        X_future = np.zeros((H, 0))
    if chain.draws.shape[0] == 0:
        raise DomainError("empty chain")

    y_mean, x_mean = y.mean(), X.mean(axis=0)
    yc, Xc, Xf = y - y_mean, X - x_mean, X_future[:H] - x_mean
    idx = thin_indices(chain.draws.shape[0], M)
    rng = np.random.default_rng([seed, 0xF0])
    means = np.empty((H, M))
    variances = np.empty((H, M))
    for col, i in enumerate(idx):
        theta = natural_from_array(chain.draws[i], spec)
        z = yc - Xc @ theta.beta if spec.m else yc
        mu, var = conditional_forecast_path(z, theta, spec, H, window_W)
        means[:, col] = y_mean + (Xf @ theta.beta if spec.m else 0.0) + mu
        variances[:, col] = var
    draws = means + np.sqrt(variances) * rng.standard_normal((H, M))
    point = means.mean(axis=1)
    tail = 0.5 * (1.0 - level)
    lo = np.minimum(np.quantile(draws, tail, axis=1), point)
    hi = np.maximum(np.quantile(draws, 1.0 - tail, axis=1), point)
    return ForecastTable(horizons=np.arange(1, H + 1), point=point, lo=lo, hi=hi,
                         draws=draws, means=means, variances=variances, level=level)


def gaussian_mixture_logpdf(x: float, means, variances) -> float:
    """log of (1/M) sum_m N(x | means_m, variances_m) via log-sum-exp."""
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    with np.errstate(divide="ignore"):
        comp = -0.5 * (np.log(2.0 * np.pi * variances) + (x - means) ** 2 / variances)
    return float(special.logsumexp(comp) - math.log(means.size))


def lpds(predictive_log_densities) -> float:
    """Negative mean log predictive density over out-of-sample points.

    Non-finite entries are excluded with a warning that reports their count.
    """
    vals = np.asarray(predictive_log_densities, dtype=float).ravel()
    if vals.size == 0:
        raise DomainError("no predictive densities")
    bad = ~np.isfinite(vals)
    if bad.any():
        warnings.warn(f"{int(bad.sum())} non-finite log predictive densities excluded",
                      RuntimeWarning, stacklevel=2)
        vals = vals[~bad]
        if vals.size == 0:
            return math.nan
    return -float(vals.mean())


def rmse(truths, points) -> float:
    truths = np.asarray(truths, dtype=float).ravel()
    points = np.asarray(points, dtype=float).ravel()
    if truths.size != points.size:
        raise DomainError("truths and points differ in length")
    if truths.size == 0:
        raise DomainError("rmse of an empty sample")
    return float(np.sqrt(np.mean((truths - points) ** 2)))


def crps(predictive_draws, truth: float) -> float:
    """Empirical CRPS: mean|X - y| - 0.5 mean|X - X'| over all draw pairs.

    The pair term uses the sorted-sample identity, O(M log M).
    """
    x = np.sort(np.asarray(predictive_draws, dtype=float).ravel())
    M = x.size
    if M < 2:
        raise DomainError("CRPS needs at least 2 draws")
    term1 = np.mean(np.abs(x - truth))
    # sum_{i,j} |x_i - x_j| = 2 sum_i (2i - M - 1) x_(i)
    i = np.arange(1, M + 1)
    pair_sum = 2.0 * np.sum((2.0 * i - M - 1.0) * x)
    return max(float(term1 - 0.5 * pair_sum / (M * M)), 0.0)


@dataclass
class DicResult:
    dic: float
    p_D: float
    mean_deviance: float
    theta_star: ParamVector
    space: str = "natural"


def dic(chain: ChainResult, loglik: Callable[[ParamVector], float], spec: ModelSpec,
        max_draws: int | None = None) -> DicResult:
    """Deviance information criterion with theta* the natural-space posterior mean.

    ``max_draws`` evaluates the mean deviance on a uniformly thinned subset.
    """
    draws = chain.draws
    if draws.shape[0] == 0:
        raise DomainError("empty chain")
    if max_draws is not None and draws.shape[0] > max_draws:
        draws = draws[thin_indices(draws.shape[0], max_draws)]
    nat = [natural_from_array(x, spec) for x in draws]
    dev = np.array([-2.0 * loglik(t) for t in nat])
    if not np.all(np.isfinite(dev)):
        raise EvaluationError("log-likelihood not finite at some posterior draws")
    theta_star = ParamVector.from_array(np.mean([t.to_array(spec) for t in nat], axis=0), spec)
    try:
        ll_star = loglik(theta_star)
    except ArtfimaDlrError as exc:
        raise EvaluationError(f"log-likelihood fails at the posterior mean: {exc}") from exc
    if not math.isfinite(ll_star):
        raise EvaluationError("log-likelihood not finite at the posterior mean")
    d_bar = float(dev.mean())
    p_d = d_bar + 2.0 * ll_star
    return DicResult(dic=d_bar + p_d, p_D=p_d, mean_deviance=d_bar, theta_star=theta_star)


@dataclass
class CvResult:
    """Per-horizon aggregate scores and the raw per-origin values."""

    horizons: np.ndarray
    n_points: np.ndarray
    neg_lpds: np.ndarray
    rmse: np.ndarray
    crps: np.ndarray
    per_origin: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    fits: int = 0

    def rows(self):
        for i, h in enumerate(self.horizons):
            yield {"horizon": int(h), "n_points": int(self.n_points[i]),
                   "neg_lpds": float(self.neg_lpds[i]), "rmse": float(self.rmse[i]),
                   "crps": float(self.crps[i])}


def rolling_cv(
    y,
    X,
    spec: ModelSpec,
    train_T: int,
    k: int,
    h_max: int,
    settings: SamplerSettings = SamplerSettings(),
    M: int = 900,
    window_W: int | None = None,
    likelihood: str | None = None,
    refit: bool | None = None,
    restarts: int = 20,
) -> CvResult:
    """Rolling-origin evaluation with a fixed training length.

    Origin i (0..k-1) trains on observations i..i+train_T-1 and forecasts the
    next h_max values; only targets inside the k evaluation points are scored,
    so horizon h receives k-h+1 scores. By default every window is re-fitted
    (warm-started from the previous MAP) with the Whittle likelihood, except
    ARFIMA which is fitted once on the first window with the exact Gaussian
    likelihood. A window whose fit fails is skipped and logged.
    """
    from .fitting import fit

    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    X = np.zeros((n, 0)) if X is None else np.asarray(X, dtype=float).reshape(n, -1)
    if train_T + k > n:
        raise DomainError(f"train_T + k = {train_T + k} exceeds the series length {n}")
    if k < 1 or h_max < 1:
        raise DomainError("k and h_max must be positive")
    long_memory = spec.family is Family.ARFIMA
    if likelihood is None:
        likelihood = "gaussian" if long_memory else "whittle"
    if refit is None:
        refit = not long_memory

    per_h = {h: {"logd": [], "sq": [], "crps": []} for h in range(1, h_max + 1)}
    per_origin, skipped = [], []
    result, warm, n_fits = None, None, 0
    for i in range(k):
        y_tr, X_tr = y[i:i + train_T], X[i:i + train_T]
        H = min(h_max, k - i)
        try:
            if result is None or refit:
                result = fit(y_tr, X_tr, spec, likelihood=likelihood,
                             settings=replace(settings, seed=settings.seed + i),
                             restarts=restarts, init=warm)
                warm = result.map.x
                n_fits += 1
            Xf = X[i + train_T:i + train_T + H]
            table = posterior_predictive(y_tr, X_tr, Xf, result.chain, spec, M=M,
                                         window_W=window_W, seed=settings.seed + i, h_max=H)
        except (ArtfimaDlrError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.warning("origin %d skipped: %s", i, exc)
            skipped.append({"origin": i, "error": type(exc).__name__, "message": str(exc)})
            continue
        truth = y[i + train_T:i + train_T + H]
        sc = table.score(truth)
        for j in range(H):
            per_h[j + 1]["logd"].append(sc["log_density"][j])
            per_h[j + 1]["sq"].append(sc["sq_error"][j])
            per_h[j + 1]["crps"].append(sc["crps"][j])
        per_origin.append({"origin": i, "truth": truth, "point": table.point[:H],
                           "log_density": sc["log_density"], "crps": sc["crps"]})

    hs = np.arange(1, h_max + 1)
    n_pts = np.array([len(per_h[h]["sq"]) for h in hs])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        neg = np.array([lpds(per_h[h]["logd"]) if per_h[h]["logd"] else np.nan for h in hs])
        rm = np.array([math.sqrt(np.mean(per_h[h]["sq"])) if per_h[h]["sq"] else np.nan for h in hs])
        cr = np.array([np.mean(per_h[h]["crps"]) if per_h[h]["crps"] else np.nan for h in hs])
    return CvResult(horizons=hs, n_points=n_pts, neg_lpds=neg, rmse=rm, crps=cr,
                    per_origin=per_origin, skipped=skipped, fits=n_fits)
