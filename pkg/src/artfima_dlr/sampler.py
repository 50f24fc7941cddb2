"""MAP search, adaptive random-walk Metropolis-Hastings and chain diagnostics."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigError, DegenerateChainWarning, DomainError, EvaluationError, OptimizationError

__all__ = [
    "SamplerSettings",
    "ChainResult",
    "MapResult",
    "find_map",
    "run_adaptive_mh",
    "effective_sample_size",
    "fd_hessian",
]

logger = logging.getLogger(__name__)

LogPosteriorFn = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class SamplerSettings:
    n_iter: int = 10000
    burn_in: int = 3000
    target_accept: float = 0.234
    adapt_start: int = 200
    rm_step_scale: float = 1.0
    seed: int = 0
    regularization: float = 1e-10
    adapt: bool = True
    init_scale: float | None = None     # None -> 2.38^2 / dim
    min_scale: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < n_iter")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigError("target_accept must lie in (0, 1)")
        if self.adapt_start < 1:
            raise ConfigError("adapt_start must be >= 1")


@dataclass
class ChainResult:
    """Post burn-in draws in unconstrained space plus adaptation state.

    ``accepted`` and ``log_alpha`` cover every iteration (burn-in included).
    """

    draws: np.ndarray
    log_post: np.ndarray
    accept_rate: float
    proposal_cov_final: np.ndarray
    scale_final: float
    ess: np.ndarray
    accepted: np.ndarray = field(repr=False)
    log_alpha: np.ndarray = field(repr=False)
    settings: SamplerSettings | None = None

    @property
    def n_kept(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]


@dataclass
class MapResult:
    x: np.ndarray
    log_post: float
    cov: np.ndarray          # proposal covariance seed
    hessian_pd: bool
    n_starts: int
    n_failed: int


def fd_hessian(f: LogPosteriorFn, x, rel_step: float = 1e-4) -> np.ndarray:
    """Central finite-difference Hessian of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    f0 = f(x)
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return H


def _local_optimize(neg, x0, dim, maxfev, simplex=True):
    best_x, best_f = x0, neg(x0)
    if simplex:
        res = optimize.minimize(
            neg, x0, method="Nelder-Mead",
            options={"maxfev": maxfev, "xatol": 1e-7, "fatol": 1e-9, "adaptive": dim > 3},
        )
        if res.fun <= best_f:
            best_x, best_f = res.x, res.fun
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        polish = optimize.minimize(neg, best_x, method="BFGS", options={"gtol": 1e-6})
    if np.isfinite(polish.fun) and polish.fun <= best_f:
        best_x, best_f = polish.x, polish.fun
    return best_x, best_f


def find_map(
    log_post: LogPosteriorFn,
    dim: int,
    restarts: int = 20,
    *,
    seed: int = 0,
    starts: Sequence[np.ndarray] = (),
    include_origin: bool = True,
    init_sampler: Callable[[np.random.Generator], np.ndarray] | None = None,
    maxfev: int | None = None,
    simplex: bool = True,
    hessian: bool = True,
) -> MapResult:
    """Multi-start MAP search in unconstrained space.

    Candidate starts are the origin, any explicit ``starts`` and ``restarts``
    draws from ``init_sampler`` (standard normal by default). Each is refined
    by Nelder-Mead and polished by BFGS with finite-difference gradients.
    The inverse negative Hessian at the optimum seeds the proposal covariance
    when positive definite; otherwise 0.01 * I is returned.

    ``simplex=False`` skips Nelder-Mead (a purely local search, for starts
    known to be close to the optimum) and ``hessian=False`` skips the
    curvature step.
    """
    rng = np.random.default_rng([seed, 7])
    if init_sampler is None:
        init_sampler = lambda r: r.standard_normal(dim)  # noqa: E731
    candidates = [np.zeros(dim)] if include_origin else []
    candidates += [np.asarray(s, dtype=float) for s in starts]
    candidates += [np.asarray(init_sampler(rng), dtype=float) for _ in range(restarts)]
    if maxfev is None:
        maxfev = 600 * dim

    def neg(x):
        val = log_post(x)
        return -val if math.isfinite(val) else np.inf

    best_x, best_f, failed = None, np.inf, 0
    for x0 in candidates:
        if not math.isfinite(log_post(x0)):
            failed += 1
            continue
        x, fval = _local_optimize(neg, x0, dim, maxfev, simplex)
        if fval < best_f:
            best_x, best_f = x, fval
    if best_x is None:
        raise OptimizationError("log posterior is non-finite at every optimizer start")

    hessian_pd = False
    cov = 0.01 * np.eye(dim)
    try:
        if not hessian:
            raise np.linalg.LinAlgError
        H = -fd_hessian(log_post, best_x)
        if np.all(np.isfinite(H)):
            np.linalg.cholesky(H)
            cov = np.linalg.inv(H)
            cov = 0.5 * (cov + cov.T)
            np.linalg.cholesky(cov)
            hessian_pd = True
    except np.linalg.LinAlgError:
        cov = 0.01 * np.eye(dim)
    return MapResult(x=best_x, log_post=-best_f, cov=cov, hessian_pd=hessian_pd,
                     n_starts=len(candidates), n_failed=failed)


def _safe_cholesky(cov, eps):
    jitter = eps
    for _ in range(12):
        try:
            return np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            cov = cov + jitter * np.eye(cov.shape[0])
            jitter *= 10.0
    raise EvaluationError("proposal covariance is not positive definite")


def run_adaptive_mh(
    log_post: LogPosteriorFn,
    init,
    settings: SamplerSettings = SamplerSettings(),
    init_cov=None,
    chain_index: int = 0,
) -> ChainResult:
    """Adaptive Gaussian random-walk Metropolis-Hastings.

    The proposal is N(x, c * Sigma). After ``adapt_start`` iterations Sigma is
    the running covariance of the whole chain plus ``regularization * I`` and
    c is reset to its initial value once at that switch. The scale follows
    the Robbins-Monro recursion ``log c += g_j (alpha_j - target)`` with
    ``g_j = rm_step_scale / max(1, j - adapt_start)``.
    Each iteration draws ``dim`` standard normals then one uniform from a
    generator seeded by ``(settings.seed, chain_index)``.
    """
    x = np.array(init, dtype=float)
    dim = x.size
    lp = log_post(x)
    if not math.isfinite(lp):
        raise EvaluationError("log posterior is not finite at the initial point")
    rng = np.random.default_rng([settings.seed, chain_index])

    cov = 0.01 * np.eye(dim) if init_cov is None else np.array(init_cov, dtype=float)
    chol = _safe_cholesky(cov, settings.regularization)
    scale = settings.init_scale if settings.init_scale is not None else 2.38 ** 2 / dim
    log_c = log_c0 = math.log(scale)

    n_iter, burn = settings.n_iter, settings.burn_in
    draws = np.empty((n_iter - burn, dim))
    lps = np.empty(n_iter - burn)
    accepted = np.zeros(n_iter, dtype=bool)
    log_alpha_hist = np.empty(n_iter)
    run_mean = x.copy()
    run_m2 = np.zeros((dim, dim))

    for j in range(1, n_iter + 1):
        xi = rng.standard_normal(dim)
        u = rng.random()
        prop = x + math.exp(0.5 * log_c) * (chol @ xi)
        lp_prop = log_post(prop)
        log_alpha = min(0.0, lp_prop - lp) if math.isfinite(lp_prop) else -np.inf
        alpha = math.exp(log_alpha)
        if u < alpha:
            x, lp = prop, lp_prop
            accepted[j - 1] = True
        log_alpha_hist[j - 1] = log_alpha
        if j > burn:
            draws[j - burn - 1] = x
            lps[j - burn - 1] = lp

        # running covariance over draws 0..j (Welford)
        delta = x - run_mean
        run_mean += delta / (j + 1)
        run_m2 += np.outer(delta, x - run_mean)

        if settings.adapt:
            gain = settings.rm_step_scale / max(1, j - settings.adapt_start)
            log_c += gain * (alpha - settings.target_accept)
            log_c = max(log_c, math.log(settings.min_scale))
            if j == settings.adapt_start:
                # the empirical covariance replaces the seed: restart c at its initial value
                log_c = log_c0
            if j >= settings.adapt_start:
                cov = run_m2 / j + settings.regularization * np.eye(dim)
                chol = _safe_cholesky(cov, settings.regularization)

    ess = np.array([effective_sample_size(draws[:, i]) if draws.shape[0] >= 100 else np.nan
                    for i in range(dim)])
    return ChainResult(
        draws=draws, log_post=lps, accept_rate=float(accepted[burn:].mean()),
        proposal_cov_final=cov, scale_final=math.exp(log_c), ess=ess,
        accepted=accepted, log_alpha=log_alpha_hist, settings=settings,
    )


def effective_sample_size(chain_column) -> float:
    """N / (1 + 2 sum rho_k) with FFT autocorrelations and Geyer's initial
    positive sequence truncation.

    The inefficiency factor is floored at 1 / log10(N), so antithetic chains
    report an ESS above N but finite. A constant chain returns 0 and emits
    :class:`DegenerateChainWarning`.
    """
    x = np.asarray(chain_column, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise DomainError(f"ESS needs at least 100 draws, got {n}")
    xc = x - x.mean()
    if not np.any(xc != 0.0) or np.dot(xc, xc) <= 1e-300:
        warnings.warn("constant chain: ESS set to 0", DegenerateChainWarning, stacklevel=2)
        return 0.0
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, nfft)[:n] / n
    rho = acov / acov[0]
    n_pairs = n // 2
    pair_sums = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    nonpos = np.nonzero(pair_sums <= 0.0)[0]
    stop = nonpos[0] if nonpos.size else n_pairs
    tau = -1.0 + 2.0 * float(np.sum(pair_sums[:stop]))
    tau = max(tau, 1.0 / math.log10(n))
    return n / tau
