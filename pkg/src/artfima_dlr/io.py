"""CSV ingestion and output, and the INI run configuration."""

from __future__ import annotations

import configparser
import csv
import io as _io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import ConfigError, ParseError
from .model import Family, ModelSpec, ParamVector, pacf_to_ar, pacf_to_ma
from .sampler import SamplerSettings

__all__ = [
    "Dataset",
    "load_csv",
    "write_csv",
    "write_json",
    "format_float",
    "RunConfig",
    "parse_lag_map",
]


def format_float(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    return "%.17g" % float(x)


@dataclass
class Dataset:
    """Response, regressors and the preprocessing applied to them."""

    time_index: np.ndarray
    y: np.ndarray
    X: np.ndarray
    column_names: list[str]
    y_name: str = "y"
    transform_log: list[str] = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.y.size

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def head(self, n: int) -> "Dataset":
        return Dataset(self.time_index[:n], self.y[:n], self.X[:n], list(self.column_names),
                       self.y_name, self.transform_log + [f"first {n} rows"])


def parse_lag_map(text: str | Mapping[str, int] | None) -> dict[str, int]:
    """``"x1:1, x2:0"`` -> {"x1": 1, "x2": 0}."""
    if text is None or text == "":
        return {}
    if isinstance(text, Mapping):
        items = text.items()
    else:
        items = []
        for part in str(text).split(","):
            if not part.strip():
                continue
            name, sep, lag = part.partition(":")
            if not sep:
                raise ConfigError(f"lag_map entry {part.strip()!r} is not name:lag")
            items.append((name.strip(), lag.strip()))
    out = {}
    for name, lag in items:
        try:
            lag_i = int(lag)
        except ValueError:
            raise ConfigError(f"lag for {name!r} is not an integer: {lag!r}") from None
        if lag_i < 0:
            raise ConfigError(f"lag for {name!r} must be non-negative")
        out[name] = lag_i
    return out


def _parse_cell(text, row, line, column):
    if text is None or text.strip() == "":
        raise ParseError(f"blank cell in column {column!r} at row {row} (line {line})")
    try:
        val = float(text)
    except ValueError:
        raise ParseError(
            f"non-numeric cell {text!r} in column {column!r} at row {row} (line {line})") from None
    if not math.isfinite(val):
        raise ParseError(f"non-finite value in column {column!r} at row {row} (line {line})")
    return val


def load_csv(path, y_column: str = "y", x_columns: Iterable[str] | None = None,
             lag_map: Mapping[str, int] | str | None = None,
             time_column: str | None = None) -> Dataset:
    """Read a headered CSV into a :class:`Dataset`.

    Rows are numbered from 1 after the header. ``x_columns=None`` takes every
    column except the response and the time column. ``lag_map`` shifts a
    regressor back by the given number of steps (x_{t-lag}); the first
    max-lag rows are then dropped from all columns.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = [(reader.line_num, r) for r in reader if r and any(c.strip() for c in r)]
    if time_column is None and header and header[0].lower() in ("t", "time", "date", "index"):
        time_column = header[0]
    if y_column not in header:
        raise ParseError(f"{path}: response column {y_column!r} not found in {header}")
    if x_columns is None:
        x_columns = [h for h in header if h not in (y_column, time_column)]
    x_columns = [c.strip() for c in x_columns if c.strip()]
    for name in x_columns + ([time_column] if time_column else []):
        if name not in header:
            raise ParseError(f"{path}: column {name!r} not found in {header}")
    lags = parse_lag_map(lag_map)
    for name in lags:
        if name not in x_columns:
            raise ParseError(f"lag_map names {name!r}, which is not a regressor")

    pos = {h: i for i, h in enumerate(header)}
    y = np.empty(len(rows))
    X = np.empty((len(rows), len(x_columns)))
    times = []
    for r, (line, cells) in enumerate(rows):
        if len(cells) != len(header):
            raise ParseError(f"{path}: row {r + 1} (line {line}) has {len(cells)} fields, "
                             f"expected {len(header)}")
        y[r] = _parse_cell(cells[pos[y_column]], r + 1, line, y_column)
        for j, name in enumerate(x_columns):
            X[r, j] = _parse_cell(cells[pos[name]], r + 1, line, name)
        if time_column:
            times.append(cells[pos[time_column]].strip())
    if y.size == 0:
        raise ParseError(f"{path}: no data rows")

    if time_column:
        try:
            time_index = np.array([float(t) for t in times])
            if np.any(np.diff(time_index) <= 0):
                raise ParseError(f"{path}: time column {time_column!r} is not increasing")
        except ValueError:
            time_index = np.array(times)
    else:
        time_index = np.arange(1, y.size + 1)

    log = [f"loaded {path.name}"]
    max_lag = max(lags.values(), default=0)
    if max_lag:
        if max_lag >= y.size:
            raise ParseError(f"lag {max_lag} leaves no rows")
        Xl = X[max_lag:].copy()
        for name, lag in lags.items():
            j = x_columns.index(name)
            Xl[:, j] = X[max_lag - lag:X.shape[0] - lag, j]
        X, y, time_index = Xl, y[max_lag:], time_index[max_lag:]
        log.append("lags " + ", ".join(f"{n}:{lag}" for n, lag in lags.items()))
    return Dataset(time_index=time_index, y=y, X=X, column_names=list(x_columns),
                   y_name=y_column, transform_log=log)


def write_csv(path, columns: Mapping[str, Any]) -> Path:
    """Write equal-length columns; floats use 17 significant digits."""
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    n = {c.shape[0] for c in cols}
    if len(n) > 1:
        raise ValueError(f"columns differ in length: {sorted(n)}")
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(cols[0].shape[0] if cols else 0):
        w.writerow([format_float(c[i]) if np.issubdtype(c.dtype, np.floating)
                    else str(c[i]) for c in cols])
    path.write_text(buf.getvalue())
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, default=_json_default, allow_nan=True) + "\n")
    return path


# --- run configuration -----------------------------------------------------

def _int(v):
    return int(v)


def _opt_int(v):
    return None if str(v).strip().lower() in ("", "none") else int(v)


def _float(v):
    return float(v)


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v):
    s = str(v).strip()
    return [] if s == "" else [float(p) for p in s.split(",") if p.strip()]


def _strs(v):
    return [p.strip() for p in str(v).split(",") if p.strip()]


def _str(v):
    return str(v).strip()


def _opt_str(v):
    s = str(v).strip()
    return None if s.lower() in ("", "none") else s


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "model": {
        "family": (_str, "ARMA"), "p": (_int, 0), "q": (_int, 0), "P": (_int, 0),
        "Q": (_int, 0), "s": (_opt_int, None), "d_int": (_int, 0), "D": (_int, 0),
        "likelihood": (_str, "whittle"), "k_cut": (_int, 0),
    },
    "sampler": {
        "n_iter": (_int, 10000), "burn_in": (_int, 3000), "target_accept": (_float, 0.234),
        "adapt_start": (_int, 200), "rm_step_scale": (_float, 1.0), "seed": (_int, 0),
        "regularization": (_float, 1e-10), "restarts": (_int, 20),
    },
    "forecast": {
        "train_T": (_opt_int, None), "k": (_int, 100), "h_max": (_int, 15), "M": (_int, 900),
        "window_W": (_opt_int, None), "level": (_float, 0.95), "refit": (_opt_str, None),
    },
    "io": {
        "data": (_opt_str, None), "y_column": (_str, "y"), "x_columns": (_opt_str, None),
        "lag_map": (_str, ""), "time_column": (_opt_str, None), "run_dir": (_str, "run"),
    },
    "truth": {
        "form": (_str, "natural"), "phi": (_floats, []), "psi": (_floats, []),
        "phi_star": (_floats, []), "psi_star": (_floats, []), "d": (_float, 0.0),
        "lam": (_float, 0.0), "sigma2": (_float, 1.0), "beta": (_floats, []),
    },
    "simulate": {
        "T": (_int, 1000), "burn": (_opt_int, None), "trunc_L": (_opt_int, None),
        "seed": (_int, 0), "method": (_str, "filter"), "x_phi": (_floats, [0.5]),
        "x_psi": (_floats, [0.3]), "x_sigma2": (_float, 1.0),
        "n_reps": (_int, 2000), "n_low_freqs": (_int, 3), "estimate_beta": (_bool, True),
    },
    "compare": {
        "likelihoods": (_strs, ["whittle", "gaussian", "kalman"]), "timing_reps": (_int, 50),
        "dic": (_bool, True), "dic_draws": (_opt_int, 1000),
    },
    "spectrum": {"n": (_int, 1000)},
}


@dataclass
class RunConfig:
    """Validated configuration: section -> key -> typed value."""

    values: dict[str, dict[str, Any]]
    source: str = ""

    @classmethod
    def from_text(cls, text: str = "", overrides: Iterable[str] = ()) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str            # keep P/p and Q/q distinct
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        raw = {sec: dict(parser[sec]) for sec in parser.sections()}
        for item in overrides:
            key, sep, value = item.partition("=")
            sec, dot, name = key.strip().partition(".")
            if not (sep and dot and name):
                raise ConfigError(f"override {item!r} is not section.key=value")
            raw.setdefault(sec, {})[name] = value.strip()
        values: dict[str, dict[str, Any]] = {}
        for sec, entries in raw.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown config section [{sec}]")
            for key in entries:
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in section [{sec}]")
        for sec, keys in SCHEMA.items():
            values[sec] = {}
            for key, (conv, default) in keys.items():
                if key in raw.get(sec, {}):
                    try:
                        values[sec][key] = conv(raw[sec][key])
                    except (TypeError, ValueError) as exc:
                        raise ConfigError(f"[{sec}] {key}: {exc}") from None
                else:
                    values[sec][key] = default
        cfg = cls(values=values, source=text)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, overrides: Iterable[str] = ()) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_text(path.read_text(), overrides)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def validate(self) -> None:
        try:
            self.model_spec()
            self.sampler_settings()
        except Exception as exc:                # noqa: BLE001 - re-raised as a config error
            raise ConfigError(f"invalid configuration: {exc}") from None
        if self["model"]["likelihood"] not in ("whittle", "gaussian", "kalman"):
            raise ConfigError(f"unknown likelihood {self['model']['likelihood']!r}")
        if self["truth"]["form"] not in ("natural", "pacf"):
            raise ConfigError("[truth] form must be 'natural' or 'pacf'")
        if self["simulate"]["method"] not in ("filter", "exact"):
            raise ConfigError("[simulate] method must be 'filter' or 'exact'")
        refit = self["forecast"]["refit"]
        if refit is not None and refit not in ("true", "false", "auto"):
            raise ConfigError("[forecast] refit must be true, false or auto")
        parse_lag_map(self["io"]["lag_map"])

    def model_spec(self, m: int | None = None) -> ModelSpec:
        mo = self["model"]
        if m is None:
            m = len(self["truth"]["beta"])
        return ModelSpec(Family(mo["family"].upper()), p=mo["p"], q=mo["q"], P=mo["P"],
                         Q=mo["Q"], s=mo["s"], d_int=mo["d_int"], D=mo["D"], m=m)

    def sampler_settings(self) -> SamplerSettings:
        sa = self["sampler"]
        return SamplerSettings(n_iter=sa["n_iter"], burn_in=sa["burn_in"],
                               target_accept=sa["target_accept"], adapt_start=sa["adapt_start"],
                               rm_step_scale=sa["rm_step_scale"], seed=sa["seed"],
                               regularization=sa["regularization"])

    def truth(self) -> ParamVector:
        """True parameters; pacf form maps the AR/MA blocks through the pacf transform."""
        tr = self["truth"]
        blocks = {k: np.asarray(tr[k]) for k in ("phi", "psi", "phi_star", "psi_star")}
        if tr["form"] == "pacf":
            blocks["phi"] = pacf_to_ar(blocks["phi"])
            blocks["phi_star"] = pacf_to_ar(blocks["phi_star"])
            blocks["psi"] = pacf_to_ma(blocks["psi"])
            blocks["psi_star"] = pacf_to_ma(blocks["psi_star"])
        return ParamVector(d=tr["d"], lam=tr["lam"], sigma2=tr["sigma2"], beta=tr["beta"],
                           **blocks)

    def refit_policy(self) -> bool | None:
        r = self["forecast"]["refit"]
        return None if r in (None, "auto") else r == "true"

    def to_ini(self) -> str:
        """Effective configuration with every default filled in."""
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for sec, keys in self.values.items():
            parser.add_section(sec)
            for key, val in keys.items():
                if val is None:
                    text = "none"
                elif isinstance(val, list):
                    text = ", ".join(format_float(v) if isinstance(v, float) else str(v)
                                     for v in val)
                elif isinstance(val, float):
                    text = format_float(val)
                else:
                    text = str(val).lower() if isinstance(val, bool) else str(val)
                parser.set(sec, key, text)
        buf = _io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def run_dir(self) -> Path:
        return Path(os.path.expanduser(self["io"]["run_dir"]))
