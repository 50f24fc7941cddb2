"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -m acceptance -s tests/test_acceptance.py``; the summary
lines also appear at the end of any pytest run that includes this file.
Expect roughly an hour on one core.
"""

import math
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate, stats

from artfima_dlr.cli import main
from artfima_dlr.fitting import LogPosterior, fit
from artfima_dlr.forecast import crps, dic, rolling_cv
from artfima_dlr.model import (
    Family,
    ModelSpec,
    ParamVector,
    natural_from_array,
    pacf_to_ar,
    pacf_to_ma,
    to_natural,
    to_unconstrained,
)
from artfima_dlr.sampler import SamplerSettings, run_adaptive_mh
from artfima_dlr.simulate import (
    SimConfig,
    periodogram_ratio_experiment,
    simulate_dlr,
    simulate_regressors,
    tempered_frac_weights,
)
from artfima_dlr.spectral import autocovariance, spectral_density
from artfima_dlr.timedomain import gaussian_loglik, kalman_loglik
from artfima_dlr.whittle import periodogram, precompute_dft, pseudo_dft, whittle_loglik

pytestmark = pytest.mark.acceptance

T_MAIN = 5001
ARMA31 = ModelSpec(Family.ARMA, p=3, q=1, m=1)
ARMA31_TRUTH = ParamVector(phi=pacf_to_ar([0.4, -0.2, 0.1]), psi=pacf_to_ma([0.2]),
                           sigma2=2.0, beta=[3.0])
X_PHI, X_PSI = (0.5, -0.3), (0.4, 0.2)


def x_innovation_variance(target_var_beta=0.014, T=T_MAIN):
    """Innovation variance of the ARMA(2,2) regressor giving GLS var(beta_hat) = target."""
    xs, xt = ModelSpec(p=2, q=2), ParamVector(phi=X_PHI, psi=X_PSI, sigma2=1.0)

    def ratio(w):
        return spectral_density(w, xt, xs) / spectral_density(w, ARMA31_TRUTH, ARMA31)

    info = T / (2 * math.pi) * integrate.quad(ratio, -math.pi, math.pi, limit=200)[0]
    return 1.0 / (target_var_beta * info)


def arma31_data(seed):
    X = simulate_regressors(T_MAIN, 1, seed=seed, phi=X_PHI, psi=X_PSI,
                            sigma2=x_innovation_variance())
    y = simulate_dlr(SimConfig(ARMA31, ARMA31_TRUTH, T_MAIN, seed=seed), X)
    return y, X


def thinned(draws, ess):
    stride = max(1, int(math.ceil(draws.shape[0] / max(float(np.min(ess)), 1.0))))
    return draws[::stride]


def test_c1_likelihood_equivalence(acceptance_record):
    y, X = arma31_data(seed=2024)
    settings = SamplerSettings(seed=11)
    t0 = time.perf_counter()
    whittle = fit(y, X, ARMA31, likelihood="whittle", settings=settings)
    chains = {"whittle": whittle.chain}
    for lik in ("gaussian", "kalman"):
        lp = LogPosterior(ARMA31, y, X, likelihood=lik)
        chains[lik] = run_adaptive_mh(lp, whittle.map.x, settings, init_cov=whittle.map.cov)
    elapsed = time.perf_counter() - t0

    names = ARMA31.natural_names()
    nat = {k: np.array([natural_from_array(x, ARMA31).to_array(ARMA31) for x in c.draws])
           for k, c in chains.items()}
    worst_z, worst_p, notes = 0.0, 1.0, []
    pairs = [("whittle", "gaussian"), ("whittle", "kalman"), ("gaussian", "kalman")]
    for a, b in pairs:
        ta = thinned(nat[a], chains[a].ess)
        tb = thinned(nat[b], chains[b].ess)
        for i, name in enumerate(names):
            sd = 0.5 * (nat[a][:, i].std(ddof=1) + nat[b][:, i].std(ddof=1))
            z = abs(nat[a][:, i].mean() - nat[b][:, i].mean()) / sd
            p = stats.ks_2samp(ta[:, i], tb[:, i]).pvalue
            if z > worst_z:
                worst_z = z
                notes.append(f"{a}/{b} {name} z={z:.3f}")
            worst_p = min(worst_p, p)
    rates = {k: c.accept_rate for k, c in chains.items()}
    rates_ok = all(0.15 <= r <= 0.35 for r in rates.values())
    passed = worst_z <= 0.5 and worst_p >= 0.001 and rates_ok
    acceptance_record(
        "C1 likelihood equivalence",
        passed,
        f"max |mean diff|/sd = {worst_z:.3f} (<= 0.5), min KS p = {worst_p:.4f} (>= 0.001), "
        f"accept rates {', '.join(f'{k} {v:.3f}' for k, v in rates.items())}, "
        f"{elapsed:.0f} s")
    assert worst_z <= 0.5, notes[-1]
    assert worst_p >= 0.001
    assert rates_ok, rates


REFERENCE_MSE = {"beta1": 0.014, "phi_tilde1": 0.065, "phi_tilde2": 0.006,
                 "phi_tilde3": 0.002, "psi1": 0.063, "sigma2": 0.002}


def test_c2_repeated_simulation_mse(acceptance_record):
    n_rep = 100
    truth = {"beta1": 3.0, "phi_tilde1": 0.4, "phi_tilde2": -0.2, "phi_tilde3": 0.1,
             "psi1": 0.2, "sigma2": 2.0}
    sl = ARMA31.slices()
    est = {k: [] for k in truth}
    for r in range(n_rep):
        y, X = arma31_data(seed=10_000 + r)
        res = fit(y, X, ARMA31, likelihood="whittle", settings=SamplerSettings(seed=r),
                  restarts=3)
        u = res.chain.draws
        pacf = np.tanh(u[:, sl["phi"]]).mean(axis=0)
        est["phi_tilde1"].append(pacf[0])
        est["phi_tilde2"].append(pacf[1])
        est["phi_tilde3"].append(pacf[2])
        # q = 1: psi_1 equals its partial autocorrelation
        est["psi1"].append(np.tanh(u[:, sl["psi"]])[:, 0].mean())
        est["sigma2"].append(np.exp(u[:, sl["sigma2"]]).mean())
        est["beta1"].append(u[:, sl["beta"]][:, 0].mean())
    mse = {k: float(np.mean((np.array(v) - truth[k]) ** 2)) for k, v in est.items()}
    ratios = {k: mse[k] / REFERENCE_MSE[k] for k in mse}
    passed = all(1 / 3 <= q <= 3 for q in ratios.values())
    acceptance_record(
        "C2 repeated-simulation MSE",
        passed,
        ", ".join(f"{k} {mse[k]:.4f} (x{ratios[k]:.2f})" for k in mse)
        + f"; tolerance x[1/3, 3], {n_rep} replicates")
    for k, q in ratios.items():
        assert 1 / 3 <= q <= 3, f"{k}: MSE {mse[k]:.5f} vs {REFERENCE_MSE[k]}"


def test_c3_speed(acceptance_record):
    y, X = arma31_data(seed=7)
    theta = ARMA31_TRUTH
    z = (y - y.mean()) - (X[:, 0] - X[:, 0].mean()) * 3.0

    def mean_time(fn, reps):
        fn()
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        return (time.perf_counter() - t0) / reps

    t_cache = mean_time(lambda: precompute_dft(y, X), 50)
    cache = precompute_dft(y, X)
    t_whittle = mean_time(lambda: whittle_loglik(cache, theta, ARMA31), 500)
    t_gauss = mean_time(lambda: gaussian_loglik(z, theta, ARMA31), 30)
    ratio = t_whittle / t_gauss
    amort = t_cache / t_whittle
    passed = ratio <= 0.2 and amort <= 50
    acceptance_record(
        "C3 speed ordering",
        passed,
        f"whittle {t_whittle * 1e6:.0f} us, gaussian {t_gauss * 1e3:.1f} ms, ratio {ratio:.4f} "
        f"(<= 0.2); cache build = {amort:.1f} whittle evaluations (<= 50)")
    assert ratio <= 0.2
    assert amort <= 50


ARTFIMA42 = (ModelSpec(Family.ARTFIMA, p=2), ParamVector(phi=[0.742, 0.227], d=2.139, lam=0.616))
ARFIMA42 = (ModelSpec(Family.ARFIMA, p=2), ParamVector(phi=[1.466, -0.525], d=0.493))


def test_c4_periodogram_distribution(acceptance_record):
    spec, theta = ARTFIMA42
    t0 = time.perf_counter()
    art = periodogram_ratio_experiment(SimConfig(spec, theta, 1001, seed=42), [0.1], 2000)
    spec_f, theta_f = ARFIMA42
    fi_1001 = periodogram_ratio_experiment(SimConfig(spec_f, theta_f, 1001, seed=43), [0.1], 2000)
    fi_10001 = periodogram_ratio_experiment(SimConfig(spec_f, theta_f, 10001, seed=44), [0.1],
                                            2000)
    elapsed = time.perf_counter() - t0
    art_ok = bool(np.all(art.ks_pvalue > 0.01))
    fi_ok = fi_1001.ks_pvalue[0] < 0.001 and fi_10001.ks_pvalue[0] < 0.001
    acceptance_record(
        "C4 low-frequency periodogram",
        art_ok and fi_ok,
        f"ARTFIMA KS p = {np.array2string(art.ks_pvalue, precision=4)} (all > 0.01); "
        f"ARFIMA lowest-frequency KS p = {fi_1001.ks_pvalue[0]:.2e} (T=1001), "
        f"{fi_10001.ks_pvalue[0]:.2e} (T=10001) (< 0.001); failed MAPs "
        f"{art.n_failed + fi_1001.n_failed + fi_10001.n_failed}; {elapsed:.0f} s")
    assert art_ok, art.ks_pvalue
    assert fi_1001.ks_pvalue[0] < 0.001
    assert fi_10001.ks_pvalue[0] < 0.001


def _gamma_formula(d, lam, L):
    with mp.workdps(40):
        d = mp.mpf(d)
        out = []
        for j in range(L + 1):
            arg = 1 + d - j
            if arg <= 0 and arg == mp.floor(arg):
                out.append(0.0)
                continue
            val = (-1) ** j * mp.gamma(1 + d) / (mp.gamma(arg) * mp.factorial(j))
            out.append(float(val * mp.exp(-mp.mpf(lam) * j)))
    return np.array(out)


def test_c5_oracle_equivalences(acceptance_record):
    rng = np.random.default_rng(5)
    errs = {}

    specs = [ModelSpec(p=1), ModelSpec(p=2, q=1), ModelSpec(p=3, q=2), ModelSpec(q=2)]
    worst = 0.0
    for case in range(200):
        spec = specs[case % len(specs)]
        theta = natural_from_array(rng.normal(scale=0.6, size=spec.dim), spec)
        z = rng.normal(size=(64, 501, 2048)[case % 3])
        a, b = kalman_loglik(z, theta, spec), gaussian_loglik(z, theta, spec)
        worst = max(worst, abs(a - b) / abs(b))
    errs["kalman = gaussian"] = (worst, 1e-7)

    d = 0.3
    k = np.arange(201)
    from scipy import special
    hosking = np.exp(special.gammaln(1 - 2 * d) + special.gammaln(k + d) - special.gammaln(d)
                     - special.gammaln(1 - d) - special.gammaln(k + 1 - d))
    g = autocovariance(ParamVector(d=d), ModelSpec(Family.ARFIMA), 200)
    errs["Hosking acv"] = (float(np.max(np.abs(g - hosking) / hosking)), 1e-4)

    worst = 0.0
    for _ in range(100):
        dd, lam = rng.uniform(-3, 3), rng.uniform(0, 2)
        ref = _gamma_formula(dd, lam, 50)
        w = tempered_frac_weights(dd, lam, 50)
        nz = ref != 0
        worst = max(worst, float(np.max(np.abs(w[nz] - ref[nz]) / np.abs(ref[nz]))),
                    float(np.max(np.abs(w[~nz]), initial=0.0)))
    errs["tempered weights"] = (worst, 1e-12)

    worst = 0.0
    for T in (101, 256, 1001):
        x = rng.normal(size=T)
        x -= x.mean()
        I = periodogram(precompute_dft(x).J_Y, T)
        total = 2 * I.sum()
        if T % 2 == 0:
            total += abs(np.sum(x * (-1.0) ** np.arange(1, T + 1))) ** 2 / (2 * math.pi * T)
        worst = max(worst, abs(total - x @ x / (2 * math.pi)) / (x @ x / (2 * math.pi)))
    errs["Parseval"] = (worst, 1e-9)

    worst = 0.0
    for _ in range(200):
        T, m = int(rng.integers(8, 400)), int(rng.integers(1, 4))
        y, X, beta = rng.normal(size=T), rng.normal(size=(T, m)), rng.normal(size=m)
        cache = precompute_dft(y, X)
        zz = y - X @ beta
        ref = np.fft.fft(zz - zz.mean())[1:cache.n_freq + 1] * np.exp(
            -2j * math.pi * np.arange(1, cache.n_freq + 1) / T)
        worst = max(worst, np.max(np.abs(pseudo_dft(cache, beta) - ref)) / np.max(np.abs(ref)))
    errs["pseudo_dft linearity"] = (worst, 1e-9)

    worst = 0.0
    for spec in (ModelSpec(p=3, q=1, m=1), ModelSpec(Family.ARFIMA, p=2, q=1, m=2),
                 ModelSpec(Family.ARTFIMA, p=1, q=2, P=1, Q=1, s=12, m=1)):
        for _ in range(1000):
            theta = natural_from_array(rng.normal(scale=1.5, size=spec.dim), spec)
            back = to_natural(to_unconstrained(theta, spec), spec)
            a, b = back.to_array(spec), theta.to_array(spec)
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0))))
    errs["transform round trip"] = (worst, 1e-10)

    draws = rng.normal(size=100_000)
    closed = 2 * stats.norm.pdf(0.0) - 1 / math.sqrt(math.pi)
    errs["CRPS Gaussian"] = (abs(crps(draws, 0.0) - closed), 0.01)

    passed = all(e <= tol for e, tol in errs.values())
    acceptance_record("C5 oracle equivalences", passed,
                      "; ".join(f"{k} {e:.1e} (<= {tol:g})" for k, (e, tol) in errs.items()))
    for k, (e, tol) in errs.items():
        assert e <= tol, k


def test_c6_forecast_pipeline(acceptance_record):
    s, n_train, k, h_max = 48, 5000, 50, 15
    spec = ModelSpec(Family.ARTFIMA, p=1, Q=1, s=s, m=1)
    theta = ParamVector(phi=[0.5], psi_star=[0.6], d=0.4, lam=0.1, sigma2=1.0, beta=[0.5])
    X = simulate_regressors(n_train + k, 1, seed=6)
    y = simulate_dlr(SimConfig(spec, theta, n_train + k, seed=6), X)
    settings = SamplerSettings(n_iter=2000, burn_in=500, seed=3)
    t0 = time.perf_counter()
    good = rolling_cv(y, X, spec, train_T=n_train, k=k, h_max=h_max, settings=settings, M=200,
                      restarts=5)
    white = rolling_cv(y, X, ModelSpec(Family.ARMA, m=1), train_T=n_train, k=k, h_max=h_max,
                       settings=settings, M=200, restarts=5)
    elapsed = time.perf_counter() - t0
    expected_counts = [k - h + 1 for h in range(1, h_max + 1)]
    counts_ok = (list(good.n_points) == expected_counts and list(white.n_points) == expected_counts)
    better = good.crps[:6] < white.crps[:6]
    passed = counts_ok and bool(np.all(better))
    acceptance_record(
        "C6 forecast pipeline",
        passed,
        f"scores per horizon k-h+1: {counts_ok}; mean CRPS h=1..6 seasonal ARTFIMA "
        f"{np.array2string(good.crps[:6], precision=3)} vs white noise "
        f"{np.array2string(white.crps[:6], precision=3)}; {elapsed:.0f} s")
    assert counts_ok
    assert np.all(better)


def test_c7_dic_order_selection(acceptance_record):
    n_rep = 50
    spec51 = ModelSpec(Family.ARMA, p=5, q=1, m=1)
    wins, min_pd = 0, math.inf
    t0 = time.perf_counter()
    for r in range(n_rep):
        y, X = arma31_data(seed=20_000 + r)
        vals = {}
        for spec in (ARMA31, spec51):
            res = fit(y, X, spec, likelihood="whittle", settings=SamplerSettings(seed=r),
                      restarts=3)
            d = dic(res.chain, res.log_posterior.loglik, spec)
            vals[spec.p] = d.dic
            min_pd = min(min_pd, d.p_D)
        wins += vals[3] < vals[5]
    share = wins / n_rep
    elapsed = time.perf_counter() - t0
    passed = share >= 0.7 and min_pd >= -0.5
    acceptance_record(
        "C7 DIC order selection",
        passed,
        f"DIC(3,1) < DIC(5,1) in {wins}/{n_rep} = {share:.2f} (>= 0.70); min p_D {min_pd:.2f} "
        f"(>= -0.5); {elapsed:.0f} s")
    assert share >= 0.7
    assert min_pd >= -0.5


C8_INI = """
[model]
family = ARTFIMA
p = 1
[truth]
phi = 0.5
d = 0.4
lam = 0.2
beta = 1.5
[simulate]
T = 800
seed = 8
[sampler]
n_iter = 3000
burn_in = 1000
restarts = 4
seed = 8
[forecast]
train_T = 780
h_max = 10
M = 300
"""


def test_c8_determinism(acceptance_record, tmp_path):
    outputs = []
    for name in ("a", "b"):
        run = tmp_path / name
        ini = tmp_path / f"{name}.ini"
        ini.write_text(C8_INI + f"[io]\ndata = {run / 'data.csv'}\nrun_dir = {run}\n")
        for cmd in ("simulate", "fit", "forecast"):
            assert main([cmd, "-c", str(ini)]) == 0
        outputs.append({f: (run / f).read_bytes()
                        for f in ("data.csv", "posterior.csv", "forecast.csv")})
    same = {f: outputs[0][f] == outputs[1][f] for f in outputs[0]}
    passed = all(same.values())
    acceptance_record("C8 determinism", passed,
                      ", ".join(f"{f} {'identical' if v else 'DIFFERENT'}" for f, v in same.items()))
    assert passed
