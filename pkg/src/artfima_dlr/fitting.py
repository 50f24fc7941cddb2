"""Log posteriors for the three likelihoods and a MAP + MCMC fitting driver."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArtfimaDlrError, DomainError
from .model import (
    Family,
    ModelSpec,
    ParamVector,
    log_prior_array,
    natural_from_array,
    sample_prior,
    to_unconstrained,
)
from .sampler import ChainResult, MapResult, SamplerSettings, find_map, run_adaptive_mh
from .timedomain import gaussian_loglik, kalman_loglik
from .whittle import precompute_dft, whittle_loglik

__all__ = ["LIKELIHOODS", "LogPosterior", "FitResult", "fit"]

logger = logging.getLogger(__name__)

LIKELIHOODS = ("whittle", "gaussian", "kalman")


def _as_design(X, T):
    if X is None:
        return np.zeros((T, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != T:
        raise DomainError(f"X has {X.shape[0]} rows but y has {T}")
    return X


class LogPosterior:
    """Unconstrained-vector -> log posterior for one dataset and likelihood.

    All likelihoods use the same demeaned model
    ``y - mean(y) = (X - mean(X)) beta + eta``. Points where the likelihood
    cannot be evaluated map to ``-inf``.
    """

    def __init__(self, spec: ModelSpec, y, X=None, likelihood: str = "whittle", k_cut: int = 0):
        if likelihood not in LIKELIHOODS:
            raise DomainError(f"unknown likelihood {likelihood!r}; expected one of {LIKELIHOODS}")
        if likelihood == "kalman" and spec.family is not Family.ARMA:
            from .errors import UnsupportedFamilyError
            raise UnsupportedFamilyError("the Kalman likelihood needs ARMA errors")
        y = np.asarray(y, dtype=float).ravel()
        X = _as_design(X, y.size)
        if X.shape[1] != spec.m:
            raise DomainError(f"spec has m={spec.m} but X has {X.shape[1]} columns")
        self.spec = spec
        self.likelihood = likelihood
        self.cache = precompute_dft(y, X, k_cut=k_cut)
        self.yc = y - self.cache.y_mean
        self.Xc = X - self.cache.x_means
        self.n_evals = 0

    @property
    def dim(self) -> int:
        return self.spec.dim

    def residuals(self, beta) -> np.ndarray:
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        return self.yc - self.Xc @ beta if beta.size else self.yc

    def loglik(self, theta: ParamVector) -> float:
        if self.likelihood == "whittle":
            return whittle_loglik(self.cache, theta, self.spec)
        z = self.residuals(theta.beta)
        if self.likelihood == "gaussian":
            return gaussian_loglik(z, theta, self.spec)
        return kalman_loglik(z, theta, self.spec)

    def __call__(self, x) -> float:
        self.n_evals += 1
        try:
            theta = natural_from_array(x, self.spec)
            val = log_prior_array(x, self.spec) + self.loglik(theta)
        except (ArtfimaDlrError, ArithmeticError, ValueError, np.linalg.LinAlgError):
            return -math.inf
        return val if math.isfinite(val) else -math.inf

    def start_point(self) -> np.ndarray:
        """Moment-based starting point: OLS beta and residual variance, white-noise errors."""
        beta = np.zeros(self.spec.m)
        if self.spec.m:
            beta = np.linalg.lstsq(self.Xc, self.yc, rcond=None)[0]
        s2 = float(np.var(self.residuals(beta))) or 1.0
        theta = ParamVector(
            phi=np.zeros(self.spec.p), psi=np.zeros(self.spec.q),
            phi_star=np.zeros(self.spec.P), psi_star=np.zeros(self.spec.Q),
            d=0.0, lam=1.0, sigma2=s2, beta=beta,
        )
        return to_unconstrained(theta, self.spec).to_array(self.spec)


@dataclass
class FitResult:
    spec: ModelSpec
    likelihood: str
    map: MapResult
    chain: ChainResult
    log_posterior: LogPosterior

    def natural_draws(self) -> np.ndarray:
        return np.array([natural_from_array(x, self.spec).to_array(self.spec)
                         for x in self.chain.draws])

    def posterior_mean(self) -> ParamVector:
        """Natural-space posterior mean."""
        return ParamVector.from_array(self.natural_draws().mean(axis=0), self.spec)


def _prior_starts(log_post: LogPosterior, scale=0.1):
    centre = log_post.start_point()
    spec = log_post.spec
    sl = spec.slices()

    def draw(rng):
        x = sample_prior(spec, rng, scale=scale)
        # centre the vague normal blocks on the moment estimates
        for key in ("sigma2", "beta"):
            x[sl[key]] += centre[sl[key]]
        return x
    return draw


def fit(
    y,
    X=None,
    spec: ModelSpec | None = None,
    likelihood: str = "whittle",
    settings: SamplerSettings = SamplerSettings(),
    restarts: int = 20,
    init=None,
    chain_index: int = 0,
    k_cut: int = 0,
) -> FitResult:
    """MAP search followed by one adaptive MH chain started at the MAP.

    ``init`` (an unconstrained point) skips the multi-start search and only
    polishes from that point; it is the warm start used by rolling evaluation.
    """
    if spec is None:
        raise DomainError("a ModelSpec is required")
    lp = LogPosterior(spec, y, X, likelihood=likelihood, k_cut=k_cut)
    if init is not None:
        mres = find_map(lp, spec.dim, restarts=0, starts=[np.asarray(init, float)],
                        include_origin=False, seed=settings.seed)
    else:
        mres = find_map(lp, spec.dim, restarts=restarts, starts=[lp.start_point()],
                        seed=settings.seed, init_sampler=_prior_starts(lp))
    logger.info("MAP log posterior %.6f (%d starts, %d non-finite)",
                mres.log_post, mres.n_starts, mres.n_failed)
    chain = run_adaptive_mh(lp, mres.x, settings, init_cov=mres.cov, chain_index=chain_index)
    return FitResult(spec=spec, likelihood=likelihood, map=mres, chain=chain, log_posterior=lp)
