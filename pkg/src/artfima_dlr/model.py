"""Model specification, parameter containers, reparameterizations and priors.

Parameters live in two spaces:

* natural space (:class:`ParamVector`): AR/MA coefficients, fractional ``d``,
  tempering ``lam``, innovation variance ``sigma2`` and regression ``beta``;
* unconstrained space (:class:`UnconstrainedParams`, or its flat array form),
  where the sampler and the optimizer move.

AR blocks are mapped through partial autocorrelations, so any point of the
unconstrained space is a stationary, invertible model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "Family",
    "ModelSpec",
    "ParamVector",
    "UnconstrainedParams",
    "pacf_to_ar",
    "ar_to_pacf",
    "pacf_to_ma",
    "ma_to_pacf",
    "to_natural",
    "to_unconstrained",
    "natural_from_array",
    "log_prior",
    "log_prior_array",
    "difference",
    "integrate",
    "ar_polynomial",
    "ma_polynomial",
    "has_roots_outside_unit_circle",
]

PRIOR_VAR_LOG = 100.0   # log sigma2, log lambda
PRIOR_VAR_BETA = 100.0
PRIOR_VAR_D = 1.0       # d (ARTFIMA) or atanh(2d) (ARFIMA)
_LOG_2PI = math.log(2.0 * math.pi)


class Family(str, enum.Enum):
    ARMA = "ARMA"
    ARFIMA = "ARFIMA"
    ARTFIMA = "ARTFIMA"


def _check_order(name, value):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class ModelSpec:
    """Error family, lag orders and regression dimension.

    ``s`` is the seasonal period; it must be given (and be >= 2) exactly when
    ``P``, ``Q`` or ``D`` is non-zero.
    """

    family: Family = Family.ARMA
    p: int = 0
    q: int = 0
    P: int = 0
    Q: int = 0
    s: int | None = None
    d_int: int = 0
    D: int = 0
    m: int = 0

    def __post_init__(self):
        try:
            family = Family(str(getattr(self.family, "value", self.family)).upper())
        except ValueError:
            raise DomainError(f"unknown family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        for name in ("p", "q", "P", "Q", "d_int", "D", "m"):
            object.__setattr__(self, name, _check_order(name, getattr(self, name)))
        seasonal = self.P + self.Q + self.D > 0
        if seasonal:
            if self.s is None or _check_order("s", self.s) < 2:
                raise DomainError("seasonal orders require a seasonal period s >= 2")
            object.__setattr__(self, "s", int(self.s))
        elif self.s is not None:
            raise DomainError("seasonal period s given without seasonal orders")

    @property
    def has_d(self) -> bool:
        return self.family is not Family.ARMA

    @property
    def has_lambda(self) -> bool:
        return self.family is Family.ARTFIMA

    @property
    def n_error_params(self) -> int:
        return self.p + self.q + self.P + self.Q + int(self.has_d) + int(self.has_lambda) + 1

    @property
    def dim(self) -> int:
        return self.n_error_params + self.m

    def slices(self) -> dict[str, slice]:
        """Positions of each block in the flat parameter layout."""
        out = {}
        pos = 0
        for key, size in (
            ("phi", self.p),
            ("psi", self.q),
            ("phi_star", self.P),
            ("psi_star", self.Q),
            ("d", int(self.has_d)),
            ("lam", int(self.has_lambda)),
            ("sigma2", 1),
            ("beta", self.m),
        ):
            out[key] = slice(pos, pos + size)
            pos += size
        return out

    def natural_names(self) -> list[str]:
        names = [f"phi{i + 1}" for i in range(self.p)]
        names += [f"psi{i + 1}" for i in range(self.q)]
        names += [f"phi_star{i + 1}" for i in range(self.P)]
        names += [f"psi_star{i + 1}" for i in range(self.Q)]
        if self.has_d:
            names.append("d")
        if self.has_lambda:
            names.append("lambda")
        names.append("sigma2")
        names += [f"beta{i + 1}" for i in range(self.m)]
        return names

    def unconstrained_names(self) -> list[str]:
        names = [f"atanh_pacf_phi{i + 1}" for i in range(self.p)]
        names += [f"atanh_pacf_psi{i + 1}" for i in range(self.q)]
        names += [f"atanh_pacf_phi_star{i + 1}" for i in range(self.P)]
        names += [f"atanh_pacf_psi_star{i + 1}" for i in range(self.Q)]
        if self.family is Family.ARFIMA:
            names.append("atanh_2d")
        elif self.family is Family.ARTFIMA:
            names.append("d")
        if self.has_lambda:
            names.append("log_lambda")
        names.append("log_sigma2")
        names += [f"beta{i + 1}" for i in range(self.m)]
        return names

    def label(self) -> str:
        core = {
            Family.ARMA: f"ARMA({self.p},{self.q})",
            Family.ARFIMA: f"ARFIMA({self.p},d,{self.q})",
            Family.ARTFIMA: f"ARTFIMA({self.p},d,lambda,{self.q})",
        }[self.family]
        if self.s is not None:
            core = "S" + core + f"({self.P},{self.D},{self.Q})_{self.s}"
        return core


def _as_vector(x, size=None, name="value"):
    arr = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if size is not None and arr.size != size:
        raise DomainError(f"{name} has length {arr.size}, expected {size}")
    return arr


@dataclass(frozen=True)
class ParamVector:
    """Natural-space parameters.

    AR polynomials are ``1 - sum(phi_i z^i)``; MA polynomials are
    ``1 + sum(psi_i z^i)``. ``d`` and ``lam`` are ignored by families that
    do not carry them.
    """

    phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    psi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phi_star: np.ndarray = field(default_factory=lambda: np.zeros(0))
    psi_star: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d: float = 0.0
    lam: float = 0.0
    sigma2: float = 1.0
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("phi", "psi", "phi_star", "psi_star", "beta"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), name=name))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "sigma2", float(self.sigma2))

    def check(self, spec: ModelSpec) -> None:
        """Raise :class:`DomainError` if the invariants for ``spec`` fail."""
        for name, size in (("phi", spec.p), ("psi", spec.q), ("phi_star", spec.P),
                           ("psi_star", spec.Q), ("beta", spec.m)):
            if getattr(self, name).size != size:
                raise DomainError(f"{name} has length {getattr(self, name).size}, expected {size}")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if spec.family is Family.ARFIMA and not abs(self.d) < 0.5:
            raise DomainError(f"ARFIMA requires |d| < 0.5, got {self.d}")
        if spec.family is Family.ARTFIMA and not self.lam > 0:
            raise DomainError(f"ARTFIMA requires lambda > 0, got {self.lam}")
        if not has_roots_outside_unit_circle(ar_polynomial(self.phi)):
            raise DomainError("AR polynomial is not stationary")
        if not has_roots_outside_unit_circle(ar_polynomial(self.phi_star)):
            raise DomainError("seasonal AR polynomial is not stationary")
        if not has_roots_outside_unit_circle(ma_polynomial(self.psi)):
            raise DomainError("MA polynomial is not invertible")
        if not has_roots_outside_unit_circle(ma_polynomial(self.psi_star)):
            raise DomainError("seasonal MA polynomial is not invertible")

    def to_array(self, spec: ModelSpec) -> np.ndarray:
        """Flat natural-space vector in :meth:`ModelSpec.natural_names` order."""
        parts = [self.phi, self.psi, self.phi_star, self.psi_star]
        if spec.has_d:
            parts.append([self.d])
        if spec.has_lambda:
            parts.append([self.lam])
        parts += [[self.sigma2], self.beta]
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    @classmethod
    def from_array(cls, x, spec: ModelSpec) -> "ParamVector":
        x = _as_vector(x, spec.dim, "parameter vector")
        sl = spec.slices()
        return cls(
            phi=x[sl["phi"]], psi=x[sl["psi"]],
            phi_star=x[sl["phi_star"]], psi_star=x[sl["psi_star"]],
            d=x[sl["d"]][0] if spec.has_d else 0.0,
            lam=x[sl["lam"]][0] if spec.has_lambda else 0.0,
            sigma2=x[sl["sigma2"]][0], beta=x[sl["beta"]],
        )


@dataclass(frozen=True)
class UnconstrainedParams:
    """Unconstrained coordinates.

    The ``*_raw`` blocks hold ``arctanh`` of partial autocorrelations.
    ``d_raw`` is ``d`` itself for ARTFIMA and ``arctanh(2d)`` for ARFIMA.
    """

    phi_raw: np.ndarray = field(default_factory=lambda: np.zeros(0))
    psi_raw: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phi_star_raw: np.ndarray = field(default_factory=lambda: np.zeros(0))
    psi_star_raw: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d_raw: float = 0.0
    log_lambda: float = 0.0
    log_sigma2: float = 0.0
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("phi_raw", "psi_raw", "phi_star_raw", "psi_star_raw", "beta"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), name=name))
        for name in ("d_raw", "log_lambda", "log_sigma2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def to_array(self, spec: ModelSpec) -> np.ndarray:
        parts = [self.phi_raw, self.psi_raw, self.phi_star_raw, self.psi_star_raw]
        if spec.has_d:
            parts.append([self.d_raw])
        if spec.has_lambda:
            parts.append([self.log_lambda])
        parts += [[self.log_sigma2], self.beta]
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    @classmethod
    def from_array(cls, x, spec: ModelSpec) -> "UnconstrainedParams":
        x = _as_vector(x, spec.dim, "unconstrained vector")
        sl = spec.slices()
        return cls(
            phi_raw=x[sl["phi"]], psi_raw=x[sl["psi"]],
            phi_star_raw=x[sl["phi_star"]], psi_star_raw=x[sl["psi_star"]],
            d_raw=x[sl["d"]][0] if spec.has_d else 0.0,
            log_lambda=x[sl["lam"]][0] if spec.has_lambda else 0.0,
            log_sigma2=x[sl["sigma2"]][0], beta=x[sl["beta"]],
        )


# --- polynomials -----------------------------------------------------------

def ar_polynomial(phi, s: int = 1) -> np.ndarray:
    """Coefficients (ascending powers) of ``1 - sum(phi_i z^(i*s))``."""
    phi = np.asarray(phi, dtype=float)
    out = np.zeros(phi.size * s + 1)
    out[0] = 1.0
    out[s::s] = -phi
    return out


def ma_polynomial(psi, s: int = 1) -> np.ndarray:
    """Coefficients (ascending powers) of ``1 + sum(psi_i z^(i*s))``."""
    psi = np.asarray(psi, dtype=float)
    out = np.zeros(psi.size * s + 1)
    out[0] = 1.0
    out[s::s] = psi
    return out


def has_roots_outside_unit_circle(coefs, margin: float = 0.0) -> bool:
    coefs = np.asarray(coefs, dtype=float)
    # a negligible leading term only adds a root near infinity
    tiny = 1e-13 * np.max(np.abs(coefs), initial=0.0)
    nz = np.nonzero(np.abs(coefs) > tiny)[0]
    coefs = coefs[:nz[-1] + 1] if nz.size else coefs[:0]
    if coefs.size <= 1:
        return True
    roots = np.roots(coefs[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + margin))


# --- partial autocorrelation maps -----------------------------------------

def pacf_to_ar(phi_tilde) -> np.ndarray:
    """Map partial autocorrelations in (-1, 1) to stationary AR coefficients.

    Runs the Durbin-Levinson recursion
    ``phi_k^(k) = r_k``, ``phi_i^(k) = phi_i^(k-1) - r_k phi_(k-i)^(k-1)``.
    """
    r = _as_vector(phi_tilde, name="phi_tilde")
    if r.size == 0:
        return r
    if not np.max(np.abs(r)) < 1.0:
        raise DomainError("partial autocorrelations must lie strictly inside (-1, 1)")
    phi = np.zeros(0)
    for k in range(r.size):
        phi = np.concatenate([phi - r[k] * phi[::-1], [r[k]]])
    return phi


def ar_to_pacf(phi) -> np.ndarray:
    """Inverse of :func:`pacf_to_ar` (the step-down recursion)."""
    phi = _as_vector(phi, name="phi").copy()
    p = phi.size
    r = np.zeros(p)
    for k in range(p - 1, -1, -1):
        rk = phi[k]
        if not abs(rk) < 1.0:
            raise DomainError("AR coefficients are not stationary")
        r[k] = rk
        head = phi[:k]
        phi = (head + rk * head[::-1]) / (1.0 - rk * rk)
    return r


def _alternate(c):
    # sign flip z -> -z maps a stationary AR polynomial to an invertible MA one
    signs = np.where(np.arange(c.size) % 2 == 0, 1.0, -1.0)
    return c * signs


def pacf_to_ma(psi_tilde) -> np.ndarray:
    """MA coefficients with ``1 + sum(psi_i z^i)`` invertible; ``psi_1 = psi_tilde_1`` when q = 1."""
    c = pacf_to_ar(psi_tilde)
    return _alternate(c) if c.size > 1 else c


def ma_to_pacf(psi) -> np.ndarray:
    try:
        return ar_to_pacf(_alternate(_as_vector(psi, name="psi")))
    except DomainError:
        raise DomainError("MA coefficients are not invertible") from None


# --- transforms ------------------------------------------------------------

def to_natural(u: UnconstrainedParams, spec: ModelSpec) -> ParamVector:
    if spec.family is Family.ARFIMA:
        d = 0.5 * math.tanh(u.d_raw)
    elif spec.family is Family.ARTFIMA:
        d = u.d_raw
    else:
        d = 0.0
    return ParamVector(
        phi=pacf_to_ar(np.tanh(u.phi_raw)),
        psi=pacf_to_ma(np.tanh(u.psi_raw)),
        phi_star=pacf_to_ar(np.tanh(u.phi_star_raw)),
        psi_star=pacf_to_ma(np.tanh(u.psi_star_raw)),
        d=d,
        lam=math.exp(u.log_lambda) if spec.has_lambda else 0.0,
        sigma2=math.exp(u.log_sigma2),
        beta=u.beta,
    )


def to_unconstrained(theta: ParamVector, spec: ModelSpec) -> UnconstrainedParams:
    theta.check(spec)
    if spec.family is Family.ARFIMA:
        d_raw = math.atanh(2.0 * theta.d)
    elif spec.family is Family.ARTFIMA:
        d_raw = theta.d
    else:
        d_raw = 0.0
    return UnconstrainedParams(
        phi_raw=np.arctanh(ar_to_pacf(theta.phi)),
        psi_raw=np.arctanh(ma_to_pacf(theta.psi)),
        phi_star_raw=np.arctanh(ar_to_pacf(theta.phi_star)),
        psi_star_raw=np.arctanh(ma_to_pacf(theta.psi_star)),
        d_raw=d_raw,
        log_lambda=math.log(theta.lam) if spec.has_lambda else 0.0,
        log_sigma2=math.log(theta.sigma2),
        beta=theta.beta,
    )


def natural_from_array(x, spec: ModelSpec) -> ParamVector:
    """Same as ``to_natural(UnconstrainedParams.from_array(x, spec), spec)``, without
    the intermediate object (this sits on the likelihood hot path)."""
    x = _as_vector(x, spec.dim, "unconstrained vector")
    p, q, P, Q = spec.p, spec.q, spec.P, spec.Q
    pos = p + q + P + Q
    r = np.tanh(x[:pos])
    d = lam = 0.0
    if spec.has_d:
        d = 0.5 * math.tanh(x[pos]) if spec.family is Family.ARFIMA else float(x[pos])
        pos += 1
    if spec.has_lambda:
        lam = math.exp(x[pos])
        pos += 1
    return ParamVector(
        phi=pacf_to_ar(r[:p]),
        psi=pacf_to_ma(r[p:p + q]),
        phi_star=pacf_to_ar(r[p + q:p + q + P]),
        psi_star=pacf_to_ma(r[p + q + P:p + q + P + Q]),
        d=d, lam=lam, sigma2=math.exp(x[pos]), beta=x[pos + 1:],
    )


# --- priors ----------------------------------------------------------------

def _log_normal(x, var):
    x = np.asarray(x, dtype=float)
    return float(np.sum(-0.5 * (math.log(2.0 * math.pi * var) + x * x / var)))


def _log_uniform_pacf(raw):
    # Unif(-1, 1) on tanh(raw), with Jacobian: log(1/2) + log sech^2(raw)
    raw = np.asarray(raw, dtype=float)
    return float(np.sum(math.log(2.0) - 2.0 * np.logaddexp(raw, -raw)))


def log_prior(u: UnconstrainedParams, spec: ModelSpec) -> float:
    """Log prior density of the unconstrained coordinates."""
    lp = _log_uniform_pacf(u.phi_raw) + _log_uniform_pacf(u.psi_raw)
    lp += _log_uniform_pacf(u.phi_star_raw) + _log_uniform_pacf(u.psi_star_raw)
    if spec.has_d:
        lp += _log_normal(u.d_raw, PRIOR_VAR_D)
    if spec.has_lambda:
        lp += _log_normal(u.log_lambda, PRIOR_VAR_LOG)
    lp += _log_normal(u.log_sigma2, PRIOR_VAR_LOG)
    lp += _log_normal(u.beta, PRIOR_VAR_BETA)
    return lp


def log_prior_array(x, spec: ModelSpec) -> float:
    """:func:`log_prior` evaluated directly on a flat unconstrained vector."""
    x = _as_vector(x, spec.dim, "unconstrained vector")
    n_pacf = spec.p + spec.q + spec.P + spec.Q
    raw = x[:n_pacf]
    lp = n_pacf * math.log(2.0) - 2.0 * float(np.sum(np.logaddexp(raw, -raw)))
    pos = n_pacf
    if spec.has_d:
        lp += -0.5 * (math.log(2.0 * math.pi * PRIOR_VAR_D) + x[pos] ** 2 / PRIOR_VAR_D)
        pos += 1
    n_log = int(spec.has_lambda) + 1
    vals = x[pos:pos + n_log]
    lp += -0.5 * (n_log * math.log(2.0 * math.pi * PRIOR_VAR_LOG)
                  + float(vals @ vals) / PRIOR_VAR_LOG)
    beta = x[pos + n_log:]
    if beta.size:
        lp += -0.5 * (beta.size * math.log(2.0 * math.pi * PRIOR_VAR_BETA)
                      + float(beta @ beta) / PRIOR_VAR_BETA)
    return float(lp)


def sample_prior(spec: ModelSpec, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Draw an unconstrained point from the prior.

    ``scale`` shrinks the normal blocks; the vague N(0, 100) priors otherwise
    produce optimizer starts far from any data-supported region.
    """
    sl = spec.slices()
    x = np.empty(spec.dim)
    n_pacf = spec.p + spec.q + spec.P + spec.Q
    x[:n_pacf] = np.arctanh(rng.uniform(-0.95, 0.95, size=n_pacf))
    if spec.has_d:
        x[sl["d"]] = rng.normal(0.0, 1.0)
    if spec.has_lambda:
        x[sl["lam"]] = rng.normal(0.0, scale * math.sqrt(PRIOR_VAR_LOG))
    x[sl["sigma2"]] = rng.normal(0.0, scale * math.sqrt(PRIOR_VAR_LOG))
    x[sl["beta"]] = rng.normal(0.0, scale * math.sqrt(PRIOR_VAR_BETA), size=spec.m)
    return x


# --- integer differencing --------------------------------------------------

def difference(series, d_int: int = 0, D: int = 0, s: int | None = None) -> np.ndarray:
    """Apply ``(1 - B)^d_int (1 - B^s)^D``; the output is ``d_int + D*s`` shorter.

    Works along axis 0, so a (T, m) regressor matrix is differenced column-wise.
    """
    x = np.asarray(series, dtype=float)
    d_int = _check_order("d_int", d_int)
    D = _check_order("D", D)
    if D > 0 and (s is None or s < 2):
        raise DomainError("seasonal differencing needs s >= 2")
    lost = d_int + D * (s or 0)
    if x.shape[0] <= lost:
        raise DomainError(f"series of length {x.shape[0]} too short for {lost} differences")
    for _ in range(D):
        x = x[s:] - x[:-s]
    for _ in range(d_int):
        x = x[1:] - x[:-1]
    return x


def integrate(diffed, head, d_int: int = 0, D: int = 0, s: int | None = None) -> np.ndarray:
    """Undo :func:`difference` given the first ``d_int + D*s`` original values."""
    head = np.asarray(head, dtype=float)
    lost = d_int + D * (s or 0)
    if head.shape[0] != lost:
        raise DomainError(f"need {lost} initial values, got {head.shape[0]}")
    seasonal_heads = [head]
    for _ in range(D):
        h = seasonal_heads[-1]
        seasonal_heads.append(h[s:] - h[:-s])
    regular_heads = [seasonal_heads[-1]]
    for _ in range(d_int):
        regular_heads.append(np.diff(regular_heads[-1], axis=0))

    x = np.asarray(diffed, dtype=float)
    for i in reversed(range(d_int)):
        x0 = regular_heads[i][:1]
        x = np.concatenate([x0, x0 + np.cumsum(x, axis=0)])
    for j in reversed(range(D)):
        out = np.empty((x.shape[0] + s,) + x.shape[1:])
        out[:s] = seasonal_heads[j][:s]
        for t in range(s, out.shape[0]):
            out[t] = out[t - s] + x[t - s]
        x = out
    return x
