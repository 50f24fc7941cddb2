"""Exact time-domain Gaussian likelihoods.

``gaussian_loglik`` works for every family: the Toeplitz covariance built from
``spectral.autocovariance`` is factorized implicitly by the Durbin-Levinson
recursion in O(T^2). ``kalman_loglik`` covers the ARMA family through its
finite state space form in O(T r^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import linalg

from .errors import DomainError, EvaluationError, UnsupportedFamilyError
from .model import Family, ModelSpec, ParamVector, ar_polynomial, ma_polynomial
from .spectral import autocovariance

__all__ = [
    "StateSpaceModel",
    "gaussian_loglik",
    "build_state_space",
    "kalman_loglik",
    "levinson_loglik",
    "levinson_predict",
    "levinson_simulate",
]

_LOG_2PI = math.log(2.0 * math.pi)


@numba.njit(cache=True)
def _levinson_loglik(gamma, z):
    T = z.size
    phi = np.zeros(T)
    prev = np.zeros(T)
    v = gamma[0]
    if not v > 0.0:
        return np.nan, 0
    ll = -0.5 * (_LOG_2PI + math.log(v) + z[0] * z[0] / v)
    for t in range(1, T):
        acc = gamma[t]
        for j in range(1, t):
            acc -= phi[j] * gamma[t - j]
        kappa = acc / v
        for j in range(1, t):
            prev[j] = phi[j]
        for j in range(1, t):
            phi[j] = prev[j] - kappa * prev[t - j]
        phi[t] = kappa
        v = v * (1.0 - kappa * kappa)
        if not v > 0.0:
            return np.nan, t
        pred = 0.0
        for j in range(1, t + 1):
            pred += phi[j] * z[t - j]
        e = z[t] - pred
        ll += -0.5 * (_LOG_2PI + math.log(v) + e * e / v)
    return ll, -1


@numba.njit(cache=True)
def _levinson_predict(gamma, x, H):
    # Conditional mean/variance of x[W..W+H-1] given x[0..W-1]; gamma has W+H lags.
    W = x.size
    n = W + H
    phi = np.zeros(n)
    prev = np.zeros(n)
    coefs = np.zeros((H, H))     # phi_{W+i, 1..H} for the future rows
    innov = np.zeros(H)
    mean = np.zeros(n)
    for t in range(W):
        mean[t] = x[t]
    v = gamma[0]
    if not v > 0.0:
        return mean[W:], innov, 0
    for t in range(1, n):
        acc = gamma[t]
        for j in range(1, t):
            acc -= phi[j] * gamma[t - j]
        kappa = acc / v
        for j in range(1, t):
            prev[j] = phi[j]
        for j in range(1, t):
            phi[j] = prev[j] - kappa * prev[t - j]
        phi[t] = kappa
        v = v * (1.0 - kappa * kappa)
        if not v > 0.0:
            return mean[W:], innov, t
        if t >= W:
            i = t - W
            m = 0.0
            for j in range(1, t + 1):
                m += phi[j] * mean[t - j]
            mean[t] = m
            innov[i] = v
            for j in range(1, min(H, t) + 1):
                coefs[i, j - 1] = phi[j]
    if W == 0:
        innov[0] = gamma[0]
    # impulse responses of the future innovations
    var = np.zeros(H)
    for l in range(H):
        c = np.zeros(H)
        c[l] = 1.0
        for i in range(l + 1, H):
            acc = 0.0
            for j in range(1, i - l + 1):
                acc += coefs[i, j - 1] * c[i - j]
            c[i] = acc
        for i in range(l, H):
            var[i] += c[i] * c[i] * innov[l]
    return mean[W:], var, -1


@numba.njit(cache=True)
def _levinson_simulate(gamma, xi):
    T = xi.size
    phi = np.zeros(T)
    prev = np.zeros(T)
    x = np.zeros(T)
    v = gamma[0]
    x[0] = math.sqrt(v) * xi[0]
    for t in range(1, T):
        acc = gamma[t]
        for j in range(1, t):
            acc -= phi[j] * gamma[t - j]
        kappa = acc / v
        for j in range(1, t):
            prev[j] = phi[j]
        for j in range(1, t):
            phi[j] = prev[j] - kappa * prev[t - j]
        phi[t] = kappa
        v = v * (1.0 - kappa * kappa)
        if not v > 0.0:
            return x, t
        m = 0.0
        for j in range(1, t + 1):
            m += phi[j] * x[t - j]
        x[t] = m + math.sqrt(v) * xi[t]
    return x, -1


def levinson_loglik(gamma, z) -> float:
    """log N(z | 0, Toeplitz(gamma)) without forming the matrix."""
    z = np.ascontiguousarray(z, dtype=float)
    gamma = np.ascontiguousarray(gamma, dtype=float)
    if gamma.size < z.size:
        raise DomainError("need at least len(z) autocovariances")
    ll, bad = _levinson_loglik(gamma, z)
    if bad >= 0:
        raise EvaluationError(
            f"Toeplitz covariance is not positive definite (prediction variance <= 0 at lag {bad})")
    return float(ll)


def levinson_predict(gamma, x, horizon: int):
    """Gaussian conditional means and variances of the next ``horizon`` values."""
    x = np.ascontiguousarray(x, dtype=float)
    gamma = np.ascontiguousarray(gamma, dtype=float)
    if gamma.size < x.size + horizon:
        raise DomainError("need len(x) + horizon autocovariances")
    mean, var, bad = _levinson_predict(gamma, x, int(horizon))
    if bad >= 0:
        raise EvaluationError(
            f"Toeplitz covariance is not positive definite (prediction variance <= 0 at lag {bad})")
    return mean, var


def levinson_simulate(gamma, xi):
    """Exact stationary Gaussian draw with autocovariance ``gamma`` from iid N(0,1) ``xi``."""
    x, bad = _levinson_simulate(np.ascontiguousarray(gamma, dtype=float),
                                np.ascontiguousarray(xi, dtype=float))
    if bad >= 0:
        raise EvaluationError(f"covariance not positive definite at lag {bad}")
    return x


def gaussian_loglik(z, theta: ParamVector, spec: ModelSpec) -> float:
    """Exact Gaussian log-likelihood of the (demeaned) pseudo data ``z``."""
    z = np.asarray(z, dtype=float).ravel()
    gamma = autocovariance(theta, spec, z.size - 1)
    return levinson_loglik(gamma, z)


@dataclass(frozen=True)
class StateSpaceModel:
    """Harvey-form ARMA state space: alpha' = T alpha + R eps, y = Z alpha."""

    r: int
    transition: np.ndarray
    state_loading: np.ndarray
    observation: np.ndarray
    innovation_variance: float
    initial_cov: np.ndarray


def build_state_space(theta: ParamVector, spec: ModelSpec) -> StateSpaceModel:
    """State space form of a (seasonal) ARMA error process.

    Seasonal polynomials are multiplied out, so ``r = max(p + sP, q + sQ + 1)``.
    The initial covariance is the stationary one (discrete Lyapunov equation).
    """
    if spec.family is not Family.ARMA:
        raise UnsupportedFamilyError(
            f"{spec.family.value} has no finite-dimensional state space form")
    ar = ar_polynomial(theta.phi)
    ma = ma_polynomial(theta.psi)
    if spec.P:
        ar = np.convolve(ar, ar_polynomial(theta.phi_star, spec.s))
    if spec.Q:
        ma = np.convolve(ma, ma_polynomial(theta.psi_star, spec.s))
    phi_full = -ar[1:]
    psi_full = ma[1:]
    r = max(phi_full.size, psi_full.size + 1)
    Tm = np.zeros((r, r))
    Tm[:phi_full.size, 0] = phi_full
    Tm[:-1, 1:] = np.eye(r - 1)
    R = np.zeros(r)
    R[0] = 1.0
    R[1:psi_full.size + 1] = psi_full
    Z = np.zeros(r)
    Z[0] = 1.0
    Q = theta.sigma2 * np.outer(R, R)
    P0 = linalg.solve_discrete_lyapunov(Tm, Q)
    return StateSpaceModel(r=r, transition=Tm, state_loading=R, observation=Z,
                           innovation_variance=theta.sigma2, initial_cov=P0)


@numba.njit(cache=True)
def _kalman_loglik(y, Tm, RRq, P0):
    r = Tm.shape[0]
    a = np.zeros(r)
    P = P0.copy()
    ll = 0.0
    for t in range(y.size):
        F = P[0, 0]
        if not (F > 0.0 and F < np.inf):
            return np.nan, t
        v = y[t] - a[0]
        ll += -0.5 * (_LOG_2PI + math.log(F) + v * v / F)
        k = P[:, 0] / F
        a_upd = a + k * v
        P_upd = P - np.outer(k, P[0, :])
        a = Tm @ a_upd
        P = Tm @ P_upd @ Tm.T + RRq
    return ll, -1


def kalman_loglik(z, theta: ParamVector, spec: ModelSpec | None = None) -> float:
    """Prediction-error decomposition log-likelihood of an ARMA error process."""
    if spec is None:
        spec = ModelSpec(Family.ARMA, p=theta.phi.size, q=theta.psi.size, m=theta.beta.size)
    ss = build_state_space(theta, spec)
    y = np.ascontiguousarray(np.asarray(z, dtype=float).ravel())
    RRq = ss.innovation_variance * np.outer(ss.state_loading, ss.state_loading)
    ll, bad = _kalman_loglik(y, ss.transition, RRq, ss.initial_cov)
    if bad >= 0:
        raise EvaluationError(f"Kalman filter diverged at t = {bad}")
    return float(ll)
