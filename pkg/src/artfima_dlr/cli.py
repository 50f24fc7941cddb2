"""Command-line entry point: ``artfima-dlr COMMAND --config run.ini``.

Every command writes into the run directory. ``INCOMPLETE`` marks a run
that has not finished; a failed run also leaves ``error.json``.
"""

from __future__ import annotations

import argparse
import inspect
import json
import logging
import sys
import time
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArtfimaDlrError, ConfigError, DomainError
from .fitting import LogPosterior, fit
from .forecast import dic, posterior_predictive, rolling_cv
from .io import Dataset, RunConfig, load_csv, write_csv, write_json
from .model import (
    ModelSpec,
    ParamVector,
    difference,
    natural_from_array,
)
from .sampler import ChainResult
from .simulate import (
    SimConfig,
    periodogram_ratio_experiment,
    simulate_error_process,
    simulate_exact,
    simulate_regressors,
)
from .spectral import spectral_density, spectrum_grid
from .whittle import periodogram, precompute_dft, pseudo_dft

__all__ = ["COMMANDS", "dispatch", "main", "build_parser"]

logger = logging.getLogger("artfima_dlr")

COMMANDS = ("fit", "forecast", "evaluate", "simulate", "qq-experiment", "compare",
            "spectrum", "periodogram")


# --- helpers ---------------------------------------------------------------

def _load_data(cfg: RunConfig) -> Dataset:
    io_cfg = cfg["io"]
    if not io_cfg["data"]:
        raise ConfigError("[io] data must name a CSV file for this command")
    x_cols = None if io_cfg["x_columns"] is None else io_cfg["x_columns"].split(",")
    if io_cfg["x_columns"] is not None and io_cfg["x_columns"].strip().lower() == "none":
        x_cols = []
    return load_csv(io_cfg["data"], y_column=io_cfg["y_column"], x_columns=x_cols,
                    lag_map=io_cfg["lag_map"], time_column=io_cfg["time_column"])


def _preprocess(cfg: RunConfig, data: Dataset):
    """Integer differencing of y and X (and the implied model spec)."""
    spec = cfg.model_spec(m=data.m)
    y, X = data.y, data.X
    if spec.d_int or spec.D:
        y = difference(y, spec.d_int, spec.D, spec.s)
        X = difference(X, spec.d_int, spec.D, spec.s)
        data.transform_log.append(f"differenced d={spec.d_int} D={spec.D} s={spec.s}")
    data.transform_log.append("demeaned y and X")
    return spec, y, X


def _training_length(cfg: RunConfig, T: int) -> int:
    n = cfg["forecast"]["train_T"]
    if n is None:
        return T
    if not 8 <= n <= T:
        raise ConfigError(f"[forecast] train_T must lie in [8, {T}]")
    return n


def _posterior_columns(spec: ModelSpec, chain: ChainResult) -> dict:
    nat = np.array([natural_from_array(x, spec).to_array(spec) for x in chain.draws])
    cols = {name: nat[:, i] for i, name in enumerate(spec.natural_names())}
    cols["log_post"] = chain.log_post
    for i, name in enumerate(spec.unconstrained_names()):
        cols["u_" + name] = chain.draws[:, i]
    return cols


def _read_posterior(run_dir: Path, spec: ModelSpec) -> ChainResult:
    path = run_dir / "posterior.csv"
    if not path.is_file():
        raise ConfigError(f"{path} not found: run `fit` first")
    raw = np.genfromtxt(path, delimiter=",", names=True)
    names = ["u_" + n for n in spec.unconstrained_names()]
    missing = [n for n in names if n not in raw.dtype.names]
    if missing:
        raise ConfigError(f"posterior.csv does not match the model (missing {missing})")
    draws = np.column_stack([np.atleast_1d(raw[n]) for n in names])
    lp = np.atleast_1d(raw["log_post"])
    dim = draws.shape[1]
    return ChainResult(draws=draws, log_post=lp, accept_rate=float("nan"),
                       proposal_cov_final=np.eye(dim), scale_final=float("nan"),
                       ess=np.full(dim, np.nan), accepted=np.zeros(0, bool),
                       log_alpha=np.zeros(0))


def _diagnostics(res, elapsed: float) -> dict:
    spec = res.spec
    return {
        "model": spec.label(),
        "likelihood": res.likelihood,
        "accept_rate": res.chain.accept_rate,
        "scale_final": res.chain.scale_final,
        "ess": dict(zip(spec.unconstrained_names(), res.chain.ess)),
        "map_unconstrained": dict(zip(spec.unconstrained_names(), res.map.x)),
        "map_natural": dict(zip(spec.natural_names(),
                                natural_from_array(res.map.x, spec).to_array(spec))),
        "map_log_post": res.map.log_post,
        "map_hessian_pd": res.map.hessian_pd,
        "posterior_mean_natural": dict(zip(spec.natural_names(),
                                           res.posterior_mean().to_array(spec))),
        "n_kept": res.chain.n_kept,
        "log_post_evaluations": res.log_posterior.n_evals,
        "seconds": elapsed,
    }


def _sim_config(cfg: RunConfig, T: int | None = None) -> SimConfig:
    theta = cfg.truth()
    spec = cfg.model_spec(m=theta.beta.size)
    si = cfg["simulate"]
    return SimConfig(spec=spec, theta_true=theta, T=T or si["T"], burn=si["burn"],
                     trunc_L=si["trunc_L"], seed=si["seed"])


def _simulate_dataset(cfg: RunConfig):
    sc = _sim_config(cfg)
    si = cfg["simulate"]
    m = sc.theta_true.beta.size
    X = simulate_regressors(sc.T, m, si["seed"], phi=si["x_phi"], psi=si["x_psi"],
                            sigma2=si["x_sigma2"])
    rng = np.random.default_rng(si["seed"])
    eta = simulate_exact(sc, rng) if si["method"] == "exact" else simulate_error_process(sc, rng)
    y = (X @ sc.theta_true.beta if m else 0.0) + eta
    return sc, y, X


# --- commands --------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, run_dir: Path) -> dict:
    sc, y, X = _simulate_dataset(cfg)
    cols = {"t": np.arange(1, sc.T + 1), "y": y}
    for j in range(X.shape[1]):
        cols[f"x{j + 1}"] = X[:, j]
    write_csv(run_dir / "data.csv", cols)
    return {"T": sc.T, "trunc_L": sc.trunc_length, "burn": sc.burn_length}


def _fit_from_config(cfg: RunConfig, y, X, spec, likelihood=None):
    settings = cfg.sampler_settings()
    return fit(y, X, spec, likelihood=likelihood or cfg["model"]["likelihood"],
               settings=settings, restarts=cfg["sampler"]["restarts"],
               k_cut=cfg["model"]["k_cut"])


def cmd_fit(cfg: RunConfig, run_dir: Path) -> dict:
    data = _load_data(cfg)
    spec, y, X = _preprocess(cfg, data)
    n = _training_length(cfg, y.size)
    t0 = time.perf_counter()
    res = _fit_from_config(cfg, y[:n], X[:n], spec)
    elapsed = time.perf_counter() - t0
    write_csv(run_dir / "posterior.csv", _posterior_columns(spec, res.chain))
    diag = _diagnostics(res, elapsed)
    diag["transform_log"] = data.transform_log
    diag["train_T"] = n
    write_json(run_dir / "diagnostics.json", diag)
    return {"accept_rate": res.chain.accept_rate}


def cmd_forecast(cfg: RunConfig, run_dir: Path) -> dict:
    data = _load_data(cfg)
    spec, y, X = _preprocess(cfg, data)
    n = _training_length(cfg, y.size)
    H = cfg["forecast"]["h_max"]
    chain = _read_posterior(run_dir, spec)
    Xf = X[n:n + H]
    if spec.m and Xf.shape[0] < H:
        raise DomainError(f"need {H} future regressor rows after row {n}, found {Xf.shape[0]}")
    fc = cfg["forecast"]
    table = posterior_predictive(y[:n], X[:n], Xf if spec.m else None, chain, spec,
                                 M=min(fc["M"], chain.n_kept), window_W=fc["window_W"],
                                 level=fc["level"], seed=cfg["sampler"]["seed"], h_max=H)
    cols = {"horizon": table.horizons, "point": table.point, "lo": table.lo, "hi": table.hi}
    truth = y[n:n + H]
    if truth.size == H:
        sc = table.score(truth)
        cols.update(truth=truth, log_density=sc["log_density"], sq_error=sc["sq_error"],
                    crps=sc["crps"])
    write_csv(run_dir / "forecast.csv", cols)
    return {"h_max": H, "scored": truth.size == H}


def cmd_evaluate(cfg: RunConfig, run_dir: Path) -> dict:
    data = _load_data(cfg)
    spec, y, X = _preprocess(cfg, data)
    fc = cfg["forecast"]
    train_T = fc["train_T"] if fc["train_T"] is not None else y.size - fc["k"]
    res = rolling_cv(y, X, spec, train_T=train_T, k=fc["k"], h_max=fc["h_max"],
                     settings=cfg.sampler_settings(), M=fc["M"], window_W=fc["window_W"],
                     likelihood=cfg["model"]["likelihood"], refit=cfg.refit_policy(),
                     restarts=cfg["sampler"]["restarts"])
    write_csv(run_dir / "metrics_h.csv", {
        "horizon": res.horizons, "n_points": res.n_points, "neg_lpds": res.neg_lpds,
        "rmse": res.rmse, "crps": res.crps})
    write_json(run_dir / "cv_windows.json", {"fits": res.fits, "skipped": res.skipped})
    return {"skipped": len(res.skipped)}


def cmd_qq_experiment(cfg: RunConfig, run_dir: Path) -> dict:
    sc = _sim_config(cfg)
    si = cfg["simulate"]
    beta = sc.theta_true.beta if sc.theta_true.beta.size else np.array([0.0])
    X = simulate_regressors(sc.T, beta.size, si["seed"], phi=si["x_phi"], psi=si["x_psi"],
                            sigma2=si["x_sigma2"])
    res = periodogram_ratio_experiment(sc, beta, si["n_reps"], si["n_low_freqs"], X=X,
                                       estimate_beta=si["estimate_beta"])
    cols = {"rank": np.arange(1, res.ratios.shape[0] + 1),
            "exp_quantile": res.theoretical_quantiles()}
    for k in range(res.ratios.shape[1]):
        cols[f"ratio_k{k + 1}"] = np.sort(res.ratios[:, k])
    write_csv(run_dir / "qq_ratios.csv", cols)
    write_json(run_dir / "ks_summary.json", {
        "omegas": res.omegas, "ks_stat": res.ks_stat, "ks_pvalue": res.ks_pvalue,
        "n_used": res.ratios.shape[0], "n_failed": res.n_failed, **res.meta})
    return {"ks_pvalue": res.ks_pvalue.tolist()}


def _time_loglik(lp: LogPosterior, theta: ParamVector, reps: int) -> float:
    lp.loglik(theta)
    t0 = time.perf_counter()
    for _ in range(reps):
        lp.loglik(theta)
    return (time.perf_counter() - t0) / reps


def cmd_compare(cfg: RunConfig, run_dir: Path) -> dict:
    if cfg["io"]["data"]:
        data = _load_data(cfg)
        spec, y, X = _preprocess(cfg, data)
    else:
        sc, y, X = _simulate_dataset(cfg)
        spec = sc.spec
    co = cfg["compare"]
    names = spec.natural_names()
    mean_rows = {"parameter": [], "likelihood": [], "mean": [], "sd": []}
    timing = {"likelihood": [], "seconds_per_eval": [], "seconds_total": [], "accept_rate": []}
    dic_out = {}
    for lik in co["likelihoods"]:
        t0 = time.perf_counter()
        res = _fit_from_config(cfg, y, X, spec, likelihood=lik)
        total = time.perf_counter() - t0
        write_csv(run_dir / f"posterior_{lik}.csv", _posterior_columns(spec, res.chain))
        nat = res.natural_draws()
        for i, name in enumerate(names):
            mean_rows["parameter"].append(name)
            mean_rows["likelihood"].append(lik)
            mean_rows["mean"].append(nat[:, i].mean())
            mean_rows["sd"].append(nat[:, i].std(ddof=1))
        theta_map = natural_from_array(res.map.x, spec)
        timing["likelihood"].append(lik)
        timing["seconds_per_eval"].append(_time_loglik(res.log_posterior, theta_map,
                                                       co["timing_reps"]))
        timing["seconds_total"].append(total)
        timing["accept_rate"].append(res.chain.accept_rate)
        if co["dic"]:
            d = dic(res.chain, res.log_posterior.loglik, spec, max_draws=co["dic_draws"])
            dic_out[lik] = {"dic": d.dic, "p_D": d.p_D, "mean_deviance": d.mean_deviance,
                            "theta_star_space": d.space}
    write_csv(run_dir / "compare_means.csv",
              {k: np.array(v, dtype=float if k in ("mean", "sd") else object)
               for k, v in mean_rows.items()})
    write_csv(run_dir / "compare_timing.csv",
              {k: np.array(v, dtype=object if k == "likelihood" else float)
               for k, v in timing.items()})
    if dic_out:
        write_json(run_dir / "dic.json", {"model": spec.label(), "by_likelihood": dic_out})
    return {"likelihoods": co["likelihoods"]}


def cmd_spectrum(cfg: RunConfig, run_dir: Path) -> dict:
    theta = cfg.truth()
    spec = cfg.model_spec(m=theta.beta.size)
    omegas, dens = spectrum_grid(theta, spec, cfg["spectrum"]["n"])
    write_csv(run_dir / "spectrum.csv", {"omega": omegas, "density": dens})
    return {"n": omegas.size}


def cmd_periodogram(cfg: RunConfig, run_dir: Path) -> dict:
    data = _load_data(cfg)
    spec, y, X = _preprocess(cfg, data)
    cache = precompute_dft(y, X)
    theta = cfg.truth()
    if theta.beta.size == spec.m and spec.m:
        beta = theta.beta
    elif spec.m:
        beta = np.linalg.lstsq(X - cache.x_means, y - cache.y_mean, rcond=None)[0]
    else:
        beta = np.zeros(0)
    cols = {"omega": cache.omegas, "periodogram": periodogram(pseudo_dft(cache, beta), cache.T)}
    if any(cfg["truth"][k] for k in ("phi", "psi", "phi_star", "psi_star")) or \
            cfg["truth"]["d"] or cfg["truth"]["sigma2"] != 1.0:
        cols["density"] = spectral_density(cache.omegas, replace(theta, beta=beta), spec)
    write_csv(run_dir / "periodogram.csv", cols)
    return {"K": cache.n_freq}


_HANDLERS = {
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "qq-experiment": cmd_qq_experiment,
    "compare": cmd_compare,
    "spectrum": cmd_spectrum,
    "periodogram": cmd_periodogram,
}


def _error_module(exc: BaseException) -> str:
    frames = inspect.getinnerframes(exc.__traceback__) if exc.__traceback__ else []
    for fr in reversed(frames):
        mod = fr.frame.f_globals.get("__name__", "")
        if mod.startswith("artfima_dlr"):
            return mod
    return "artfima_dlr"


def dispatch(command: str, cfg: RunConfig, run_dir: Path | None = None) -> int:
    """Run one command; returns the process exit status (0 on success)."""
    if command not in _HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    run_dir = Path(run_dir) if run_dir is not None else cfg.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    marker = run_dir / "INCOMPLETE"
    marker.write_text(command + "\n")
    (run_dir / "error.json").unlink(missing_ok=True)
    (run_dir / "config.echo").write_text(cfg.to_ini())
    try:
        summary = _HANDLERS[command](cfg, run_dir)
    except Exception as exc:                      # noqa: BLE001 - reported, not swallowed
        write_json(run_dir / "error.json", {
            "command": command,
            "module": _error_module(exc),
            "error": type(exc).__name__,
            "message": str(exc),
            "traceback": traceback.format_exc(),
        })
        logger.error("%s failed in %s: %s", command, _error_module(exc), exc)
        return 2 if isinstance(exc, ConfigError) else 1
    marker.unlink()
    logger.info("%s finished: %s", command, json.dumps(summary, default=str))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artfima-dlr",
        description="Bayesian dynamic linear regression with ARMA/ARFIMA/ARTFIMA errors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("-c", "--config", help="INI run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config value")
    parser.add_argument("--run-dir", help="output directory (overrides [io] run_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            cfg = RunConfig.from_file(args.config, args.overrides)
        else:
            cfg = RunConfig.from_text("", args.overrides)
    except ArtfimaDlrError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return dispatch(args.command, cfg, Path(args.run_dir) if args.run_dir else None)


if __name__ == "__main__":
    sys.exit(main())
