import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from artfima_dlr.errors import DomainError, EvaluationError
from artfima_dlr.model import ModelSpec, ParamVector, to_unconstrained
from artfima_dlr.forecast import (
    conditional_forecast,
    conditional_forecast_path,
    crps,
    dic,
    gaussian_mixture_logpdf,
    lpds,
    posterior_predictive,
    rmse,
    rolling_cv,
    thin_indices,
)
from artfima_dlr.sampler import ChainResult, SamplerSettings
from artfima_dlr.simulate import SimConfig, simulate_error_process


def constant_chain(theta, spec, n=50):
    x = to_unconstrained(theta, spec).to_array(spec)
    draws = np.tile(x, (n, 1))
    return ChainResult(draws=draws, log_post=np.zeros(n), accept_rate=0.0,
                       proposal_cov_final=np.eye(spec.dim), scale_final=1.0,
                       ess=np.zeros(spec.dim), accepted=np.zeros(n, bool),
                       log_alpha=np.zeros(n), settings=SamplerSettings(n_iter=n + 1, burn_in=1))


class TestConditionalForecast:
    def test_white_noise(self):
        z = np.random.default_rng(0).normal(size=100)
        mean, var = conditional_forecast(z, ParamVector(sigma2=2.0), ModelSpec(), 3)
        assert mean == pytest.approx(0.0, abs=1e-12)
        assert var == pytest.approx(2.0, rel=1e-6)

    def test_ar1_closed_form(self):
        phi, s2 = 0.6, 1.5
        z = np.random.default_rng(1).normal(size=200)
        means, vars_ = conditional_forecast_path(z, ParamVector(phi=[phi], sigma2=s2),
                                                 ModelSpec(p=1), 10)
        h = np.arange(1, 11)
        assert_allclose(means, phi ** h * z[-1], rtol=1e-6, atol=1e-10)
        assert_allclose(vars_, s2 * (1 - phi ** (2 * h)) / (1 - phi ** 2), rtol=1e-6)

    def test_long_horizon_limit(self):
        theta = ParamVector(phi=[0.8], psi=[0.2], sigma2=1.0)
        spec = ModelSpec(p=1, q=1)
        z = np.random.default_rng(2).normal(size=300)
        mean, var = conditional_forecast(z, theta, spec, 500)
        from artfima_dlr.spectral import autocovariance

        assert mean == pytest.approx(0.0, abs=1e-6)
        assert var == pytest.approx(autocovariance(theta, spec, 0)[0], rel=1e-4)

    def test_variance_monotone(self):
        theta = ParamVector(phi=[0.5, 0.2], psi=[0.4])
        z = np.random.default_rng(3).normal(size=150)
        _, v = conditional_forecast_path(z, theta, ModelSpec(p=2, q=1), 20)
        assert np.all(np.diff(v) >= -1e-12)

    def test_bad_horizon(self):
        with pytest.raises(DomainError):
            conditional_forecast(np.zeros(5), ParamVector(), ModelSpec(), 0)

    def test_thin_indices(self):
        assert list(thin_indices(10, 5)) == [0, 2, 4, 6, 8]
        with pytest.raises(DomainError):
            thin_indices(3, 4)


class TestPosteriorPredictive:
    def test_degenerate_chain_matches_conditional(self):
        spec = ModelSpec(p=1, m=1)
        theta = ParamVector(phi=[0.5], sigma2=1.0, beta=[2.0])
        rng = np.random.default_rng(4)
        X = rng.normal(size=(120, 1))
        y = 1.0 + X[:, 0] * 2.0 + simulate_error_process(SimConfig(spec, theta, 120, seed=1))
        Xf = rng.normal(size=(4, 1))
        table = posterior_predictive(y, X, Xf, constant_chain(theta, spec), spec, M=20)
        z = (y - y.mean()) - (X[:, 0] - X[:, 0].mean()) * 2.0
        mu, var = conditional_forecast_path(z, theta, spec, 4)
        expected = y.mean() + (Xf[:, 0] - X[:, 0].mean()) * 2.0 + mu
        assert_allclose(table.point, expected, rtol=1e-9)
        assert_allclose(table.variances[:, 0], var)
        assert np.all(table.lo <= table.point) and np.all(table.point <= table.hi)

    def test_beta_zero(self):
        spec = ModelSpec(m=1)
        theta = ParamVector(sigma2=1.0, beta=[0.0])
        y = np.random.default_rng(5).normal(size=80)
        X = np.random.default_rng(6).normal(size=(80, 1))
        table = posterior_predictive(y, X, np.full((2, 1), 100.0), constant_chain(theta, spec),
                                     spec, M=10)
        assert_allclose(table.point, y.mean(), atol=1e-6)

    def test_missing_future_regressors(self):
        spec = ModelSpec(m=1)
        with pytest.raises(DomainError):
            posterior_predictive(np.zeros(20), np.ones((20, 1)), None,
                                 constant_chain(ParamVector(beta=[0.0]), spec), spec, M=5, h_max=2)


class TestScores:
    def test_lpds(self):
        assert lpds([-1.0, -2.0]) == pytest.approx(1.5)

    def test_lpds_excludes_nonfinite(self):
        with pytest.warns(RuntimeWarning, match="1 non-finite"):
            assert lpds([-1.0, -np.inf, -3.0]) == pytest.approx(2.0)

    def test_rmse(self):
        assert rmse([1.0, 2.0], [1.0, 4.0]) == pytest.approx(math.sqrt(2.0))
        with pytest.raises(DomainError):
            rmse([1.0], [1.0, 2.0])

    def test_crps_two_points(self):
        assert crps([0.0, 1.0], 0.0) == pytest.approx(0.25)

    def test_crps_point_mass(self):
        assert crps([2.0, 2.0, 2.0], 5.0) == pytest.approx(3.0)

    def test_crps_gaussian(self):
        draws = np.random.default_rng(7).normal(size=200_000)
        assert crps(draws, 0.0) == pytest.approx(0.2337, abs=0.003)

    def test_crps_matches_integral(self):
        draws = np.random.default_rng(8).normal(1.0, 2.0, size=50)
        y = 0.3
        xs = np.sort(draws)

        def integrand(t):
            F = np.searchsorted(xs, t, side="right") / xs.size
            return (F - (t >= y)) ** 2

        pts = np.concatenate([xs, [y]])
        val, _ = integrate.quad(integrand, pts.min() - 1, pts.max() + 1, points=pts, limit=500)
        assert crps(draws, y) == pytest.approx(val, rel=1e-6)

    def test_crps_pair_sum(self):
        draws = np.random.default_rng(9).normal(size=300)
        y = 0.7
        brute = np.mean(np.abs(draws - y)) - 0.5 * np.mean(np.abs(draws[:, None] - draws[None, :]))
        assert crps(draws, y) == pytest.approx(brute, rel=1e-10)

    def test_mixture_logpdf(self):
        val = gaussian_mixture_logpdf(0.5, [0.0, 1.0], [1.0, 4.0])
        ref = math.log(0.5 * stats.norm.pdf(0.5) + 0.5 * stats.norm.pdf(0.5, 1.0, 2.0))
        assert val == pytest.approx(ref, rel=1e-12)


class TestDic:
    def test_constant_chain_zero_penalty(self):
        spec = ModelSpec(p=1)
        theta = ParamVector(phi=[0.3], sigma2=1.0)
        res = dic(constant_chain(theta, spec), lambda t: -5.0 - t.phi[0], spec)
        assert res.p_D == pytest.approx(0.0, abs=1e-12)
        assert res.dic == pytest.approx(2 * 5.3)

    def test_quadratic_penalty(self):
        spec = ModelSpec(p=1)
        rng = np.random.default_rng(10)
        raw = rng.normal(0.0, 0.1, size=4000)
        chain = constant_chain(ParamVector(phi=[0.0]), spec, n=4000)
        chain.draws[:, 0] = raw

        def ll(t):
            return -0.5 * t.phi[0] ** 2 / 0.01

        res = dic(chain, ll, spec)
        # deviance is chi-square with 1 df around the mean: p_D close to 1
        assert res.p_D == pytest.approx(1.0, abs=0.1)

    def test_nonfinite(self):
        spec = ModelSpec(p=1)
        with pytest.raises(EvaluationError):
            dic(constant_chain(ParamVector(phi=[0.2]), spec), lambda t: -np.inf, spec)


class TestRollingCv:
    def test_row_counts(self):
        spec = ModelSpec(p=1)
        theta = ParamVector(phi=[0.5])
        y = simulate_error_process(SimConfig(spec, theta, 330, seed=11))
        settings = SamplerSettings(n_iter=600, burn_in=200, adapt_start=100)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = rolling_cv(y, None, spec, train_T=300, k=3, h_max=2, settings=settings, M=50,
                             restarts=2)
        assert list(res.n_points) == [3, 2]
        assert res.fits == 3 and not res.skipped
        rows = list(res.rows())
        assert rows[0]["horizon"] == 1 and np.isfinite(rows[1]["crps"])

    def test_too_long(self):
        with pytest.raises(DomainError):
            rolling_cv(np.zeros(50), None, ModelSpec(), train_T=45, k=10, h_max=1)
