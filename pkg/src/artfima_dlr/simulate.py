"""Synthetic series for every error family and the low-frequency
periodogram-ratio experiment."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal, special, stats

from .errors import DomainError
from .model import (
    Family,
    ModelSpec,
    ParamVector,
    ar_polynomial,
    has_roots_outside_unit_circle,
    ma_polynomial,
)
from .spectral import autocovariance, spectral_density
from .timedomain import levinson_simulate
from .whittle import periodogram, precompute_dft, pseudo_dft

__all__ = [
    "SimConfig",
    "ExperimentResult",
    "tempered_frac_weights",
    "tempered_frac_weights_gamma",
    "default_trunc_length",
    "simulate_error_process",
    "simulate_exact",
    "simulate_arma",
    "simulate_regressors",
    "simulate_dlr",
    "periodogram_ratio_experiment",
]

logger = logging.getLogger(__name__)

_TAIL_TOL = 1e-12
_MAX_TRUNC = 2_000_000
_EXACT_MAX_T = 4096


def tempered_frac_weights(d: float, lam: float, L: int) -> np.ndarray:
    """Coefficients w_0..w_L of (1 - exp(-lam) B)^d.

    Uses w_0 = 1, w_j = w_{j-1} (j - 1 - d) / j * exp(-lam). The inverse
    operator has weights ``tempered_frac_weights(-d, lam, L)``.
    """
    L = int(L)
    if L < 0:
        raise DomainError("L must be non-negative")
    j = np.arange(1, L + 1)
    w = np.empty(L + 1)
    w[0] = 1.0
    w[1:] = np.cumprod((j - 1.0 - d) / j * math.exp(-lam))
    return w


def tempered_frac_weights_gamma(d: float, lam: float, L: int) -> np.ndarray:
    """Same weights from the Gamma-function form
    (-1)^j Gamma(1+d) / (Gamma(1+d-j) j!) exp(-lam j); a reference for testing."""
    j = np.arange(L + 1, dtype=float)
    log_mag = special.gammaln(1.0 + d) - special.gammaln(1.0 + d - j) - special.gammaln(j + 1.0)
    sign = special.gammasgn(1.0 + d) * special.gammasgn(1.0 + d - j) * (-1.0) ** j
    out = sign * np.exp(log_mag - lam * j)
    # 1/Gamma(1+d-j) vanishes when 1+d-j is a non-positive integer
    pole = (1.0 + d - j <= 0) & (np.floor(1.0 + d - j) == 1.0 + d - j)
    out[pole] = 0.0
    return out


def default_trunc_length(spec: ModelSpec, theta: ParamVector, n_total: int) -> int:
    """Truncation of the inverse fractional filter.

    ARTFIMA: smallest L whose dropped tail sum |w_j| is below 1e-12 (bounded
    by a geometric series once the ratio |(j-1+d)/j| e^-lam is below one).
    ARFIMA: max(5000, 8 * n_total).
    """
    if not spec.has_d or theta.d == 0.0:
        return 0
    if spec.family is Family.ARFIMA:
        return max(5000, 8 * n_total)
    d, r = -theta.d, math.exp(-theta.lam)
    w, j = 1.0, 0
    while j < _MAX_TRUNC:
        j += 1
        w *= (j - 1.0 - d) / j * r
        ratio = abs((j - d) / (j + 1.0)) * r
        if ratio < 1.0 and abs(w) * ratio / (1.0 - ratio) < _TAIL_TOL:
            return j
    return _MAX_TRUNC


def _default_burn(spec: ModelSpec) -> int:
    return 10 * max(spec.p, (spec.s or 0) * spec.P, 100)


@dataclass(frozen=True)
class SimConfig:
    """Settings for one synthetic error series.

    ``burn`` and ``trunc_L`` default (None) to 10 * max(p, s*P, 100) and
    :func:`default_trunc_length`.
    """

    spec: ModelSpec
    theta_true: ParamVector
    T: int
    burn: int | None = None
    trunc_L: int | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.T) < 1:
            raise DomainError("T must be positive")

    @property
    def burn_length(self) -> int:
        return _default_burn(self.spec) if self.burn is None else int(self.burn)

    @property
    def trunc_length(self) -> int:
        if self.trunc_L is not None:
            return int(self.trunc_L)
        return default_trunc_length(self.spec, self.theta_true, self.T + self.burn_length)


def _stationary_polys(theta: ParamVector, spec: ModelSpec):
    ar = ar_polynomial(theta.phi)
    ma = ma_polynomial(theta.psi)
    if spec.P:
        ar = np.convolve(ar, ar_polynomial(theta.phi_star, spec.s))
    if spec.Q:
        ma = np.convolve(ma, ma_polynomial(theta.psi_star, spec.s))
    if not has_roots_outside_unit_circle(ar):
        raise DomainError("theta_true is not stationary")
    if spec.family is Family.ARFIMA and not abs(theta.d) < 0.5:
        raise DomainError("ARFIMA simulation needs |d| < 0.5")
    if spec.family is Family.ARTFIMA and not theta.lam > 0:
        raise DomainError("ARTFIMA simulation needs lambda > 0")
    return ar, ma


def _integrate_zero(x, spec: ModelSpec):
    for _ in range(spec.D):
        out = x.copy()
        for t in range(spec.s, out.size):
            out[t] += out[t - spec.s]
        x = out
    for _ in range(spec.d_int):
        x = np.cumsum(x)
    return x


def simulate_error_process(config: SimConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw eta_1..eta_T from phi(B) Delta^{d,lam} eta = psi(B) eps.

    The MA filter is applied to Gaussian noise, then the inverse fractional
    filter by truncated convolution, then the AR recursion; the first
    ``burn`` values are discarded. Integer differencing orders in the spec
    are undone by cumulative sums from zero initial values.
    """
    spec, theta = config.spec, config.theta_true
    theta.check(replace(spec, m=theta.beta.size))
    ar, ma = _stationary_polys(theta, spec)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.T + config.burn_length
    L = config.trunc_length
    eps = rng.normal(0.0, math.sqrt(theta.sigma2), size=n + L + ma.size - 1)
    u = signal.lfilter(ma, [1.0], eps)[ma.size - 1:]        # drop the MA start-up
    if L > 0:
        w = tempered_frac_weights(-theta.d, theta.lam if spec.has_lambda else 0.0, L)
        u = signal.fftconvolve(u, w, mode="valid")
    eta = signal.lfilter([1.0], ar, u)[-config.T:]
    return _integrate_zero(eta, spec)


def simulate_exact(config: SimConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Exact stationary draw via the Durbin-Levinson factorization of the
    autocovariance matrix (O(T^2), limited to T <= 4096)."""
    if config.T > _EXACT_MAX_T:
        raise DomainError(f"exact simulation is limited to T <= {_EXACT_MAX_T}")
    spec, theta = config.spec, config.theta_true
    _stationary_polys(theta, spec)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    gamma = autocovariance(theta, spec, config.T - 1)
    eta = levinson_simulate(gamma, rng.standard_normal(config.T))
    return _integrate_zero(eta, spec)


def simulate_arma(phi, psi, sigma2: float, T: int, rng: np.random.Generator,
                  burn: int = 1000) -> np.ndarray:
    """Plain ARMA(p, q) draw of length T."""
    spec = ModelSpec(Family.ARMA, p=np.size(phi), q=np.size(psi))
    theta = ParamVector(phi=phi, psi=psi, sigma2=sigma2)
    return simulate_error_process(SimConfig(spec, theta, T, burn=burn), rng)


# Default exogenous process for experiments.
X_PROCESS_PHI = (0.5,)
X_PROCESS_PSI = (0.3,)


def simulate_regressors(T: int, m: int, seed: int, phi=X_PROCESS_PHI, psi=X_PROCESS_PSI,
                        sigma2: float = 1.0) -> np.ndarray:
    """m independent ARMA regressor columns, reproducible from ``seed``."""
    rng = np.random.default_rng([seed, 0xC0FFEE])
    cols = [simulate_arma(phi, psi, sigma2, T, rng) for _ in range(m)]
    return np.column_stack(cols) if cols else np.zeros((T, 0))


def simulate_dlr(config: SimConfig, X, rng: np.random.Generator | None = None) -> np.ndarray:
    """y = X beta + eta with beta taken from ``config.theta_true``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    beta = config.theta_true.beta
    if X.shape != (config.T, beta.size):
        raise DomainError(f"X must have shape ({config.T}, {beta.size}), got {X.shape}")
    eta = simulate_error_process(config, rng)
    return X @ beta + eta


@dataclass
class ExperimentResult:
    """Ratio samples (n_reps x n_low_freqs) and per-frequency KS tests against Exp(1)."""

    ratios: np.ndarray
    omegas: np.ndarray
    beta_hat: np.ndarray
    ks_stat: np.ndarray
    ks_pvalue: np.ndarray
    n_failed: int = 0
    meta: dict = field(default_factory=dict)

    def theoretical_quantiles(self) -> np.ndarray:
        """Exp(1) quantiles at plotting positions (i - 0.5) / n."""
        n = self.ratios.shape[0]
        return stats.expon.ppf((np.arange(1, n + 1) - 0.5) / n)


def _map_beta(y, X, spec, theta_true):
    from .fitting import LogPosterior
    from .model import to_unconstrained
    from .sampler import find_map

    lp = LogPosterior(spec, y, X, likelihood="whittle")
    x0 = to_unconstrained(theta_true, spec).to_array(spec)
    res = find_map(lp, spec.dim, restarts=0, starts=[x0], include_origin=False,
                   simplex=False, hessian=False)
    return res.x[spec.slices()["beta"]]


def periodogram_ratio_experiment(
    config: SimConfig,
    beta_true,
    n_reps: int,
    n_low_freqs: int = 3,
    X=None,
    estimate_beta: bool = True,
    ratio_spec: ModelSpec | None = None,
    ratio_theta: ParamVector | None = None,
) -> ExperimentResult:
    """I_Z(w_k; beta_hat) / f(w_k; theta_true) at the lowest Fourier frequencies.

    Each replicate simulates ``y = X beta_true + eta`` with the same fixed
    ``X`` (an ARMA(1,1) draw when not given), estimates beta by the Whittle
    MAP started at the truth (or uses ``beta_true`` when ``estimate_beta`` is
    False) and records the ratios. ``ratio_spec``/``ratio_theta`` override the
    density in the denominator. Replicate r uses the generator
    ``default_rng([seed, r])``.
    """
    if n_reps < 100:
        raise DomainError("n_reps must be at least 100")
    beta_true = np.atleast_1d(np.asarray(beta_true, dtype=float))
    m = beta_true.size
    T = config.T
    if X is None:
        X = simulate_regressors(T, m, config.seed)
    X = np.asarray(X, dtype=float).reshape(T, m)
    theta_true = replace(config.theta_true, beta=beta_true)
    spec = replace(config.spec, m=m)
    config = replace(config, spec=spec, theta_true=theta_true)
    omegas = 2.0 * np.pi * np.arange(1, n_low_freqs + 1) / T
    f = spectral_density(omegas, ratio_theta or theta_true,
                         ratio_spec or spec)
    # one truncation length for all replicates
    config = replace(config, trunc_L=config.trunc_length)

    ratios = np.full((n_reps, n_low_freqs), np.nan)
    betas = np.full((n_reps, m), np.nan)
    failed = 0
    for r in range(n_reps):
        rng = np.random.default_rng([config.seed, r])
        y = X @ beta_true + simulate_error_process(config, rng)
        beta_hat = beta_true
        if estimate_beta and m:
            try:
                beta_hat = _map_beta(y, X, spec, theta_true)
            except Exception as exc:          # noqa: BLE001 - logged and counted
                logger.warning("replicate %d: MAP failed (%s)", r, exc)
                failed += 1
                continue
        cache = precompute_dft(y, X)
        I = periodogram(pseudo_dft(cache, beta_hat)[:n_low_freqs], T)
        ratios[r] = I / f
        betas[r] = beta_hat
    ok = ~np.isnan(ratios[:, 0])
    ks = [stats.kstest(ratios[ok, k], "expon") for k in range(n_low_freqs)]
    return ExperimentResult(
        ratios=ratios[ok], omegas=omegas, beta_hat=betas[ok],
        ks_stat=np.array([t.statistic for t in ks]),
        ks_pvalue=np.array([t.pvalue for t in ks]),
        n_failed=failed,
        meta={"T": T, "n_reps": n_reps, "trunc_L": config.trunc_L,
              "burn": config.burn_length, "family": spec.family.value},
    )
