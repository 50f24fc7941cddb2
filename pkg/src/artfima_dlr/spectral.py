"""Spectral densities of (seasonal) ARMA / ARFIMA / ARTFIMA processes and
autocovariances obtained from them by numerical Fourier inversion."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DomainError, EvaluationError
from .model import (
    Family,
    ModelSpec,
    ParamVector,
    ar_polynomial,
    has_roots_outside_unit_circle,
    ma_polynomial,
)

__all__ = [
    "FrequencyGrid",
    "spectral_density",
    "log_spectral_density",
    "autocovariance",
    "spectrum_grid",
]

_LOG_2PI = math.log(2.0 * math.pi)
_MIN_GRID = 2 ** 14
_LONG_MEMORY_GRID = 2 ** 18
_MAX_GRID = 2 ** 22


def _log_abs2(coefs, z):
    """log |sum_k coefs[k] z^k|^2, elementwise over z."""
    if coefs.size == 1:
        return np.zeros(z.shape)
    val = np.polyval(coefs[::-1], z)
    return np.log(val.real * val.real + val.imag * val.imag)


class FrequencyGrid:
    """Trigonometric tables for repeatedly evaluating spectra on fixed frequencies."""

    def __init__(self, omegas):
        self.omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        self._z = np.exp(-1j * self.omegas)
        self._sin_half = np.sin(0.5 * self.omegas)
        self._zs = {}

    def __len__(self):
        return self.omegas.size

    def _seasonal_z(self, s):
        zs = self._zs.get(s)
        if zs is None:
            zs = self._zs[s] = np.exp(-1j * s * self.omegas)
        return zs

    def log_density(self, theta: ParamVector, spec: ModelSpec) -> np.ndarray:
        """log f(omega); +inf marks the ARFIMA pole at omega = 0."""
        logf = np.full(self.omegas.shape, math.log(theta.sigma2) - _LOG_2PI)
        logf += _log_abs2(ma_polynomial(theta.psi), self._z)
        logf -= _log_abs2(ar_polynomial(theta.phi), self._z)
        if spec.P or spec.Q:
            zs = self._seasonal_z(spec.s)
            logf += _log_abs2(ma_polynomial(theta.psi_star), zs)
            logf -= _log_abs2(ar_polynomial(theta.phi_star), zs)
        d = theta.d if spec.has_d else 0.0
        if d != 0.0:
            if spec.family is Family.ARTFIMA:
                # |1 - exp(-(lam + i w))|^2 = (1 - a)^2 + 4 a sin^2(w/2), a = exp(-lam)
                a = math.exp(-theta.lam)
                one_minus_a = -math.expm1(-theta.lam)
                base = one_minus_a * one_minus_a + 4.0 * a * self._sin_half ** 2
                logf -= d * np.log(base)
            else:
                with np.errstate(divide="ignore"):
                    logf -= 2.0 * d * np.log(np.abs(2.0 * self._sin_half))
        return logf

    def density(self, theta: ParamVector, spec: ModelSpec) -> np.ndarray:
        return np.exp(self.log_density(theta, spec))


def _pole_check(omega, theta, spec):
    if spec.family is Family.ARFIMA and theta.d > 0:
        if np.any(np.sin(0.5 * np.asarray(omega)) == 0.0):
            raise DomainError("ARFIMA spectral density with d > 0 is infinite at omega = 0")


def log_spectral_density(omega, theta: ParamVector, spec: ModelSpec):
    _pole_check(omega, theta, spec)
    out = FrequencyGrid(omega).log_density(theta, spec)
    return float(out[0]) if np.ndim(omega) == 0 else out


def spectral_density(omega, theta: ParamVector, spec: ModelSpec):
    """Spectral density in power per radian (integrates to the variance over [-pi, pi]).

    Accepts a scalar or an array of angular frequencies. ARMA ignores ``d`` and
    ``lam``; ARFIMA ignores ``lam``.
    """
    _pole_check(omega, theta, spec)
    out = FrequencyGrid(omega).density(theta, spec)
    return float(out[0]) if np.ndim(omega) == 0 else out


def spectrum_grid(theta: ParamVector, spec: ModelSpec, n: int = 1000):
    """(omegas, values) on n equispaced frequencies in (0, pi]."""
    omegas = np.pi * np.arange(1, n + 1) / n
    return omegas, spectral_density(omegas, theta, spec)


def _full_ar(theta, spec):
    poly = ar_polynomial(theta.phi)
    if spec.P:
        poly = np.convolve(poly, ar_polynomial(theta.phi_star, spec.s))
    return poly


def _full_ma(theta, spec):
    poly = ma_polynomial(theta.psi)
    if spec.Q:
        poly = np.convolve(poly, ma_polynomial(theta.psi_star, spec.s))
    return poly


def _grid_size(theta, spec, max_lag):
    n = max(8 * max_lag, _MIN_GRID)
    if spec.family is Family.ARFIMA and theta.d != 0.0:
        n = max(n, _LONG_MEMORY_GRID)
    if spec.family is Family.ARTFIMA and theta.d != 0.0:
        # tempered tail decays like exp(-lam k); keep the aliased tail negligible
        n = max(n, int(min(60.0 / theta.lam, _MAX_GRID)))
    ar = np.trim_zeros(_full_ar(theta, spec), "b")
    if ar.size > 1:
        rmin = np.min(np.abs(np.roots(ar[::-1])))
        n = max(n, int(min(60.0 / math.log(rmin), _MAX_GRID)))
    return 1 << (max(n, 1) - 1).bit_length()


def _acv_on_grid(theta, spec, max_lag, n):
    dw = 2.0 * math.pi / n
    omegas = dw * (np.arange(n // 2) + 0.5)
    f_half = FrequencyGrid(omegas).density(theta, spec)
    f = np.concatenate([f_half, f_half[::-1]])   # symmetric about pi
    k = np.arange(max_lag + 1)
    gamma = dw * np.real(np.fft.fft(f)[: max_lag + 1] * np.exp(-1j * math.pi * k / n))
    d = theta.d if spec.has_d else 0.0
    if spec.family is Family.ARFIMA and d != 0.0:
        # Midpoint rule error for the |w|^(-2d) singularity at w = 0 (generalized
        # Euler-Maclaurin, leading term): 2 G(0) zeta(2d, 1/2) dw^(1 - 2d).
        alpha = 2.0 * d
        g0 = theta.sigma2 / (2.0 * math.pi)
        g0 *= (np.sum(_full_ma(theta, spec)) / np.sum(_full_ar(theta, spec))) ** 2
        hurwitz_half = (2.0 ** alpha - 1.0) * special.zeta(alpha)
        gamma -= 2.0 * g0 * hurwitz_half * dw ** (1.0 - alpha)
    return gamma


def autocovariance(theta: ParamVector, spec: ModelSpec, max_lag: int,
                   check_convergence: bool = True) -> np.ndarray:
    """gamma(0..max_lag) by midpoint-rule inversion of the spectral density.

    ARFIMA long memory uses a grid of at least 2^18 points, subtracts the
    leading quadrature error of the pole at zero, and (if
    ``check_convergence``) doubles the grid until gamma changes by less than
    1e-4 relative.
    """
    max_lag = int(max_lag)
    if max_lag < 0:
        raise DomainError("max_lag must be non-negative")
    if spec.family is Family.ARFIMA and not abs(theta.d) < 0.5:
        raise DomainError(f"ARFIMA is non-stationary for d = {theta.d}")
    if spec.family is Family.ARTFIMA and not theta.lam > 0:
        raise DomainError("ARTFIMA requires lambda > 0")
    if not has_roots_outside_unit_circle(_full_ar(theta, spec)):
        raise DomainError("AR polynomial is not stationary")

    n = _grid_size(theta, spec, max_lag)
    gamma = _acv_on_grid(theta, spec, max_lag, n)
    long_memory = spec.family is Family.ARFIMA and theta.d != 0.0
    if long_memory and check_convergence:
        while True:
            finer = _acv_on_grid(theta, spec, max_lag, 2 * n)
            tol = 1e-4 * np.abs(finer) + 1e-12 * abs(finer[0])
            if np.all(np.abs(finer - gamma) <= tol):
                gamma = finer
                break
            n *= 2
            gamma = finer
            if n >= _MAX_GRID:
                raise EvaluationError(
                    f"autocovariance did not converge on a grid of {n} points")
    if not (np.all(np.isfinite(gamma)) and gamma[0] > 0):
        raise EvaluationError("autocovariance is not finite/positive")
    return gamma
