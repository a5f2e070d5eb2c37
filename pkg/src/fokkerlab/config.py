"""TOML run configurations for the command-line front end.

A config is a TOML document with top-level scalars (``seed``,
``output_dir``, ``threads``, ``checks``) and the tables ``model``,
``grid``, ``prior``, ``prior_q``, ``time``, ``tolerances``,
``montecarlo`` and ``linear``. Values are checked when the config is
loaded, so bad input is reported before any computation starts.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from .errors import ConfigError, FokkerLabError
from .grid import (
    DensityField,
    Grid1D,
    gaussian_density,
    lognormal_density,
    mixture_density,
)
from .identities import CHECK_NAMES, DEFAULT_TOLERANCES
from .lingauss import GaussianState, LinearSdeModel
from .process import SdeModel, make_custom_model, model_from_name

MV_CHECKS = ("entropy_rate_mv", "van_trees_mv")
ALL_CHECKS = CHECK_NAMES + MV_CHECKS
BUILTIN_MODELS = ("brownian", "ou", "gbm")
PRIOR_FAMILIES = ("gaussian", "lognormal", "mixture")


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``section.key=value`` overrides; values are parsed as TOML."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        parts = [p.strip() for p in key.strip().split(".")]
        if not all(parts):
            raise ConfigError(f"override key {key!r} is malformed")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-table value")
        node[parts[-1]] = _parse_value(value.strip())
    return raw


def canonical_hash(raw: dict) -> str:
    """sha256 of the config as sorted, compact JSON."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _section(raw: dict, name: str, required: bool = True) -> dict | None:
    sec = raw.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return None
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _num(sec: dict, sec_name: str, key: str, default=None, positive=False, integer=False):
    if key not in sec:
        if default is None:
            raise ConfigError(f"[{sec_name}] is missing required key {key!r}")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"[{sec_name}].{key} must be a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"[{sec_name}].{key} must be an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"[{sec_name}].{key} must be finite")
    if positive and not v > 0:
        raise ConfigError(f"[{sec_name}].{key} must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _num_list(sec: dict, sec_name: str, key: str) -> list[float]:
    v = sec.get(key)
    if not isinstance(v, list) or not v:
        raise ConfigError(f"[{sec_name}].{key} must be a non-empty array of numbers")
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ConfigError(f"[{sec_name}].{key} has a non-numeric entry {x!r}")
    return [float(x) for x in v]


def _matrix(sec: dict, sec_name: str, key: str) -> np.ndarray:
    v = sec.get(key)
    try:
        m = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"[{sec_name}].{key} must be a row-major nested array") from None
    if m.ndim != 2 or not np.all(np.isfinite(m)):
        raise ConfigError(f"[{sec_name}].{key} must be a finite 2-D nested array")
    return m


def _wrap(what: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (FokkerLabError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def build_model(sec: dict) -> SdeModel:
    name = sec.get("name")
    if name in BUILTIN_MODELS:
        params = {}
        for key in {"ou": ("alpha",), "gbm": ("mu", "sigma")}.get(name, ()):
            if key in sec:
                params[key] = _num(sec, "model", key)
        return _wrap("[model]", model_from_name, name, **params)
    if name == "custom":
        for key in ("drift", "diffusion"):
            if not isinstance(sec.get(key), str):
                raise ConfigError(f"[model].{key} must be an expression string")
        return _wrap(
            "[model]", make_custom_model, sec["drift"], sec["diffusion"],
            sec.get("support", "full-line"), sec.get("drift_dx"), sec.get("weight_dxx"),
        )
    raise ConfigError(f"[model].name must be one of {BUILTIN_MODELS + ('custom',)}, got {name!r}")


def build_grid(sec: dict) -> Grid1D:
    lo = _num(sec, "grid", "lo")
    hi = _num(sec, "grid", "hi")
    n = _num(sec, "grid", "n", integer=True)
    scale = sec.get("scale", "linear")
    return _wrap("[grid]", Grid1D, lo, hi, n, scale)


def build_prior(sec: dict, grid: Grid1D, name: str = "prior") -> DensityField:
    family = sec.get("family")
    if family == "gaussian":
        return _wrap(f"[{name}]", gaussian_density, _num(sec, name, "mean", 0.0),
                     _num(sec, name, "var", positive=True), grid)
    if family == "lognormal":
        return _wrap(f"[{name}]", lognormal_density, _num(sec, name, "log_mean", 0.0),
                     _num(sec, name, "log_var", positive=True), grid)
    if family == "mixture":
        w = _num_list(sec, name, "weights")
        m = _num_list(sec, name, "means")
        v = _num_list(sec, name, "variances")
        if not len(w) == len(m) == len(v):
            raise ConfigError(f"[{name}] weights, means and variances must have equal length")
        return _wrap(f"[{name}]", mixture_density, w, m, v, grid)
    raise ConfigError(f"[{name}].family must be one of {PRIOR_FAMILIES}, got {family!r}")


def sample_prior(sec: dict, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` samples from the prior family described by ``sec``."""
    family = sec.get("family")
    if family == "gaussian":
        return rng.normal(float(sec.get("mean", 0.0)), math.sqrt(float(sec["var"])), n)
    if family == "lognormal":
        return np.exp(rng.normal(float(sec.get("log_mean", 0.0)), math.sqrt(float(sec["log_var"])), n))
    w = np.asarray(sec["weights"], float)
    k = rng.choice(w.size, size=n, p=w / w.sum())
    means = np.asarray(sec["means"], float)[k]
    sds = np.sqrt(np.asarray(sec["variances"], float))[k]
    return rng.normal(means, sds)


@dataclass(frozen=True, eq=False)
class TimeSettings:
    t: float | None
    h: float | None
    dt: float | None
    t_values: tuple
    snapshots: tuple


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    seed: int
    output_dir: Path
    threads: int
    checks: tuple
    tolerances: dict
    model: SdeModel | None
    grid: Grid1D | None
    prior: DensityField | None
    prior_q: DensityField | None
    time: TimeSettings
    montecarlo: dict | None
    linear_model: LinearSdeModel | None
    linear_prior: GaussianState | None

    @property
    def config_hash(self) -> str:
        return canonical_hash(self.raw)

    def tolerance(self, check: str) -> float:
        return self.tolerances.get(check, DEFAULT_TOLERANCES.get(check, 1e-6))


def _time(sec: dict | None) -> TimeSettings:
    if sec is None:
        return TimeSettings(None, None, None, (), ())
    t = _num(sec, "time", "t", positive=True) if "t" in sec else None
    h = _num(sec, "time", "h", positive=True) if "h" in sec else None
    dt = _num(sec, "time", "dt", positive=True) if "dt" in sec else None
    if h is not None and t is not None and not h < t:
        raise ConfigError(f"[time].h={h} must be smaller than [time].t={t}")
    t_values = tuple(_num_list(sec, "time", "t_values")) if "t_values" in sec else ()
    if any(v <= 0 for v in t_values):
        raise ConfigError("[time].t_values entries must all be > 0")
    if list(t_values) != sorted(t_values):
        raise ConfigError("[time].t_values must be sorted")
    snaps = tuple(_num_list(sec, "time", "snapshots")) if "snapshots" in sec else ()
    if snaps and (min(snaps) < 0 or (t is not None and max(snaps) > t)):
        raise ConfigError("[time].snapshots must lie in [0, t]")
    return TimeSettings(t, h, dt, t_values, snaps)


def _linear(sec: dict | None):
    if sec is None:
        return None, None
    A = _matrix(sec, "linear", "A")
    b = _matrix(sec, "linear", "b")
    d = A.shape[0]
    model = _wrap("[linear]", LinearSdeModel, d, A, b)
    mean = sec.get("prior_mean", [0.0] * d)
    cov = _matrix(sec, "linear", "prior_cov") if "prior_cov" in sec else np.eye(d)
    prior = _wrap("[linear]", GaussianState, mean, cov, 0.0)
    return model, prior


def parse_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a raw config mapping and build the objects it describes."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    threads = raw.get("threads", 1)
    if isinstance(threads, bool) or not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"threads must be a positive integer, got {threads!r}")
    out = raw.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir must be a non-empty string")
    out_path = Path(out)
    if base_dir is not None and not out_path.is_absolute():
        out_path = base_dir / out_path

    checks = raw.get("checks", [])
    if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
        raise ConfigError("checks must be an array of names")
    unknown = [c for c in checks if c not in ALL_CHECKS]
    if unknown:
        raise ConfigError(f"unknown check name(s) {unknown}; known: {list(ALL_CHECKS)}")

    tol_sec = _section(raw, "tolerances", required=False) or {}
    tolerances = {}
    for k in tol_sec:
        if k not in ALL_CHECKS:
            raise ConfigError(f"[tolerances] names unknown check {k!r}")
        tolerances[k] = _num(tol_sec, "tolerances", k, positive=True)

    model_sec = _section(raw, "model", required=False)
    model = build_model(model_sec) if model_sec is not None else None
    grid_sec = _section(raw, "grid", required=False)
    grid = build_grid(grid_sec) if grid_sec is not None else None
    prior_sec = _section(raw, "prior", required=False)
    prior_q_sec = _section(raw, "prior_q", required=False)
    prior = prior_q = None
    if prior_sec is not None or prior_q_sec is not None:
        if grid is None:
            raise ConfigError("missing [grid] section (needed by [prior])")
        prior = build_prior(prior_sec, grid) if prior_sec is not None else None
        prior_q = build_prior(prior_q_sec, grid, "prior_q") if prior_q_sec is not None else None

    mc = _section(raw, "montecarlo", required=False)
    if mc is not None:
        _num(mc, "montecarlo", "particles", positive=True, integer=True)
        _num(mc, "montecarlo", "dt", positive=True)
    lin_model, lin_prior = _linear(_section(raw, "linear", required=False))
    return RunConfig(
        raw=raw, seed=int(seed), output_dir=out_path, threads=int(threads),
        checks=tuple(checks), tolerances=tolerances, model=model, grid=grid,
        prior=prior, prior_q=prior_q, time=_time(_section(raw, "time", required=False)),
        montecarlo=mc, linear_model=lin_model, linear_prior=lin_prior,
    )


def load_config(path, overrides=()) -> RunConfig:
    """Read, override and validate a TOML config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(apply_overrides(raw, overrides))
