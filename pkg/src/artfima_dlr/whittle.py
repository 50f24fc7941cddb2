"""DFT precomputation, pseudo-data periodogram and the Whittle log-likelihood.

The DFTs of the response and of every regressor column are computed once;
the DFT of the pseudo data ``y - X beta`` is then linear in ``beta`` and costs
O(K m) per likelihood evaluation instead of an FFT.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EvaluationError
from .model import Family, ModelSpec, ParamVector
from .spectral import FrequencyGrid

__all__ = [
    "DftCache",
    "precompute_dft",
    "pseudo_dft",
    "periodogram",
    "whittle_loglik",
    "n_positive_frequencies",
]

logger = logging.getLogger(__name__)
_warned_long_memory = False


def n_positive_frequencies(T: int) -> int:
    """(T-1)/2 for odd T, T/2 - 1 for even T (Nyquist dropped)."""
    return (T - 1) // 2


@dataclass(frozen=True)
class DftCache:
    """Immutable DFTs at the positive Fourier frequencies 2 pi k / T, k = 1..K.

    ``J_X`` has shape (K, m). ``k_cut`` low ordinates are excluded from the
    likelihood (default 0).
    """

    T: int
    omegas: np.ndarray
    J_Y: np.ndarray
    J_X: np.ndarray
    y_mean: float
    x_means: np.ndarray
    k_cut: int = 0
    grid: FrequencyGrid = field(repr=False, compare=False, default=None)

    @property
    def n_freq(self) -> int:
        return self.omegas.size

    @property
    def m(self) -> int:
        return self.J_X.shape[1]


def _dft_positive(z, T, K):
    # Sum_{t=1}^T z_t exp(-i w_k t): numpy's FFT indexes t from 0, hence the phase
    spec = np.fft.rfft(z, axis=0)[1:K + 1]
    phase = np.exp(-2j * np.pi * np.arange(1, K + 1) / T)
    return spec * (phase if z.ndim == 1 else phase[:, None])


def precompute_dft(y, X=None, k_cut: int = 0) -> DftCache:
    """Demean ``y`` and each column of ``X`` and store their DFTs.

    ``X`` may be None or have zero columns (pure error-process model).
    """
    y = np.asarray(y, dtype=float).ravel()
    T = y.size
    if T < 8:
        raise DomainError(f"need at least 8 observations, got {T}")
    if X is None:
        X = np.zeros((T, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != T:
        raise DomainError(f"X has {X.shape[0]} rows but y has {T}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise DomainError("input contains NaN or infinite values")
    if X.shape[1] > 0 and np.linalg.matrix_rank(X - X.mean(axis=0)) < X.shape[1]:
        warnings.warn("demeaned regressor matrix is rank deficient", RuntimeWarning, stacklevel=2)

    K = n_positive_frequencies(T)
    if not 0 <= k_cut < K:
        raise DomainError(f"k_cut must lie in [0, {K})")
    y_mean = float(y.mean())
    x_means = X.mean(axis=0)
    J_Y = _dft_positive(y - y_mean, T, K)
    J_X = _dft_positive(X - x_means, T, K) if X.shape[1] else np.zeros((K, 0), complex)
    omegas = 2.0 * np.pi * np.arange(1, K + 1) / T
    return DftCache(T=T, omegas=omegas, J_Y=J_Y, J_X=J_X, y_mean=y_mean,
                    x_means=x_means, k_cut=int(k_cut), grid=FrequencyGrid(omegas))


def pseudo_dft(cache: DftCache, beta) -> np.ndarray:
    """DFT of the pseudo data ``y - X beta`` as ``J_Y - J_X beta``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.size != cache.m:
        raise DomainError(f"beta has length {beta.size}, expected {cache.m}")
    if cache.m == 0:
        return cache.J_Y
    return cache.J_Y - cache.J_X @ beta


def periodogram(J_Z, T: int) -> np.ndarray:
    """I(w_k) = |J(w_k)|^2 / (2 pi T)."""
    J_Z = np.asarray(J_Z)
    return (J_Z.real ** 2 + J_Z.imag ** 2) / (2.0 * math.pi * T)


def whittle_loglik(cache: DftCache, theta: ParamVector, spec: ModelSpec) -> float:
    """-sum_k [log f(w_k) + I(w_k; beta) / f(w_k)] over the positive frequencies."""
    global _warned_long_memory
    if spec.family is Family.ARFIMA and not _warned_long_memory:
        _warned_long_memory = True
        warnings.warn(
            "the Whittle approximation is unreliable at low frequencies for "
            "long-memory (ARFIMA) errors; prefer the exact Gaussian likelihood",
            RuntimeWarning, stacklevel=2)
    I = periodogram(pseudo_dft(cache, theta.beta), cache.T)
    logf = cache.grid.log_density(theta, spec)
    if cache.k_cut:
        I, logf = I[cache.k_cut:], logf[cache.k_cut:]
    val = -float(np.sum(logf + I * np.exp(-logf)))
    if not math.isfinite(val):
        raise EvaluationError("spectral density is not finite on the Fourier grid")
    return val
