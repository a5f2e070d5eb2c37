"""``fokker-lab`` command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 usage or config error,
3 runtime failure (solver instability, particle blow-up, numeric error).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import threading
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, sample_prior
from .errors import ConfigError, FokkerLabError, PreconditionError, UnsupportedModelError
from .fpsolver import SolveSpec, Stepper, solve
from .grid import make_uniform_grid
from .identities import (
    curve_to_csv,
    immse_curve,
    run_checks,
    verify_entropy_rate,
    verify_fisher_bridge,
    verify_immse_curve,
    verify_kl_rate,
    verify_mi_rate,
    verify_mmse_bridge,
    verify_ou_fisher_bound,
    verify_van_trees,
)
from .infofun import build_joint, build_joint_numeric, model_weight
from .lingauss import propagate, verify_entropy_rate_mv, verify_van_trees_mv
from .montecarlo import simulate, thread_count
from .process import kernel_selfcheck
from .report import reports_to_csv, summary_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
MV_STEP = 1e-5
OUTPUT_FILES = ("trajectory.csv", "ensemble.csv", "reports.csv", "summary.txt", "curve.csv",
                "manifest.json")


class _Usage(Exception):
    pass


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if name == "time.t":
            if cfg.time.t is None:
                raise ConfigError("missing [time].t")
            continue
        if getattr(cfg, name) is None:
            raise ConfigError(f"missing [{name}] section")


def _write(out: Path, name: str, text: str, files: dict) -> None:
    data = text.encode("utf-8")
    (out / name).write_bytes(data)
    files[name] = hashlib.sha256(data).hexdigest()


def _write_manifest(out: Path, cfg: RunConfig, command: str, files: dict, summary: dict,
                    started: float) -> None:
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash,
        "files": dict(sorted(files.items())),
        "seed": cfg.seed,
        "summary": summary,
        "version": __version__,
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _prepare_output(cfg: RunConfig, command: str) -> Path:
    """``output_dir/<command>``, with stale outputs of earlier runs removed."""
    out = cfg.output_dir / command
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name in OUTPUT_FILES:
            (out / name).unlink(missing_ok=True)
        probe = out / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output_dir {out} is not writable: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig) -> int:
    started = time.perf_counter()
    _require(cfg, "model", "grid", "prior", "time.t")
    dt = cfg.time.dt
    if dt is not None:
        bound = Stepper(cfg.model, cfg.grid).dt_max(0.0)
        if dt > bound:
            raise ConfigError(f"[time].dt={dt:g} exceeds the positivity bound {bound:.3e}")
    spec = SolveSpec(cfg.model, cfg.prior, cfg.time.t, dt, "crank-nicolson",
                     cfg.time.snapshots or (cfg.time.t,))
    out = _prepare_output(cfg, "solve")
    traj = solve(spec)
    files: dict = {}
    _write(out, "trajectory.csv", traj.to_csv(), files)
    summary = {"mass_drift": float(abs(traj.fields[-1].mass() - traj.fields[0].mass())),
               "snapshots": len(traj.times)}
    if cfg.montecarlo is not None:
        rng = np.random.Generator(np.random.Philox(key=[cfg.seed, 2 ** 32]))
        x0 = sample_prior(cfg.raw["prior"], int(cfg.montecarlo["particles"]), rng)
        ens = simulate(cfg.model, x0, cfg.time.t, float(cfg.montecarlo["dt"]), cfg.seed,
                       thread_count(cfg.threads))
        _write(out, "ensemble.csv", ens.to_csv(), files)
        summary["particles"] = len(ens)
    _write_manifest(out, cfg, "solve", files, summary, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _joint(cfg: RunConfig):
    model, prior, t = cfg.model, cfg.prior, cfg.time.t
    if model.kernel is not None:
        return build_joint(prior, model.kernel, None, t)
    g = cfg.grid
    # numeric joints need room around the prior grid for the output law
    span = g.hi - g.lo
    grid_xt = make_uniform_grid(g.lo - 0.5 * span, g.hi + 0.5 * span, 2 * g.n - 1)
    return build_joint_numeric(prior, model, grid_xt, t, cfg.time.dt)


def _check_builders(cfg: RunConfig) -> dict:
    """Zero-argument callables for each configured check, keyed by name."""
    builders = {}
    time_s = cfg.time
    needs_1d = [c for c in cfg.checks if not c.endswith("_mv")]
    if needs_1d:
        _require(cfg, "model", "grid", "prior")
    if any(c in ("entropy_rate", "kl_rate", "mi_rate", "fisher_bridge", "mmse_bridge", "van_trees")
           for c in cfg.checks):
        _require(cfg, "time.t")
    joint_cache: dict = {}
    lock = threading.Lock()

    def joint():
        with lock:
            if "j" not in joint_cache:
                joint_cache["j"] = _joint(cfg)
            return joint_cache["j"]

    model = cfg.model
    b = model_weight(model) if model is not None else None
    for name in cfg.checks:
        tol = cfg.tolerance(name)
        if name == "entropy_rate":
            builders[name] = lambda tol=tol: verify_entropy_rate(
                model, cfg.prior, time_s.t, time_s.h, tol, time_s.dt)
        elif name == "kl_rate":
            _require(cfg, "prior_q")
            builders[name] = lambda tol=tol: verify_kl_rate(
                model, cfg.prior, cfg.prior_q, time_s.t, time_s.h, tol, time_s.dt)
        elif name in ("mi_rate", "mmse_bridge", "immse") and model.kernel is None:
            raise UnsupportedModelError(f"check {name!r} needs a model with a closed-form kernel")
        elif name == "mi_rate":
            builders[name] = lambda tol=tol: verify_mi_rate(model, cfg.prior, time_s.t, time_s.h, tol)
        elif name == "fisher_bridge":
            builders[name] = lambda tol=tol: verify_fisher_bridge(joint(), b, tol, model.name)
        elif name == "mmse_bridge":
            builders[name] = lambda tol=tol: verify_mmse_bridge(joint(), model.kernel, b, tol, model.name)
        elif name == "van_trees":
            builders[name] = lambda tol=tol: verify_van_trees(
                joint(), b, "conditional-mean", tol, model.name)
        elif name == "immse":
            if not time_s.t_values:
                raise ConfigError("check 'immse' needs [time].t_values")
            builders[name] = lambda tol=tol: verify_immse_curve(model, cfg.prior, time_s.t_values, tol)
        elif name == "ou_fisher_bound":
            if model.name != "ou":
                raise ConfigError("check 'ou_fisher_bound' needs [model].name = \"ou\"")
            ts = time_s.t_values or ((time_s.t,) if time_s.t else ())
            if not ts:
                raise ConfigError("check 'ou_fisher_bound' needs [time].t or [time].t_values")
            builders[name] = lambda tol=tol: verify_ou_fisher_bound(
                model.params["alpha"], cfg.prior, ts, tol)
        elif name in ("entropy_rate_mv", "van_trees_mv"):
            if cfg.linear_model is None:
                raise ConfigError(f"check {name!r} needs a [linear] section")
            t_lin = time_s.t if time_s.t is not None else 1.0
            if name == "entropy_rate_mv":
                # the rate is taken one step h past the given state, so start
                # that step short of t
                builders[name] = lambda tol=tol: verify_entropy_rate_mv(
                    cfg.linear_model,
                    propagate(cfg.linear_model, cfg.linear_prior, t_lin - MV_STEP),
                    MV_STEP, tol)
            else:
                builders[name] = lambda tol=tol: verify_van_trees_mv(
                    cfg.linear_model, cfg.linear_prior, t_lin, tol)
    return builders


def cmd_verify(cfg: RunConfig) -> int:
    started = time.perf_counter()
    if not cfg.checks:
        raise ConfigError("checks must list at least one identity")
    builders = _check_builders(cfg)
    out = _prepare_output(cfg, "verify")
    reports = run_checks(builders, thread_count(cfg.threads))
    files: dict = {}
    _write(out, "reports.csv", reports_to_csv(reports), files)
    _write(out, "summary.txt", summary_text(reports), files)
    n_pass = sum(r.passed for r in reports)
    summary = {"passed": n_pass, "total": len(reports),
               "checks": {r.name: r.passed for r in reports}}
    _write_manifest(out, cfg, "verify", files, summary, started)
    sys.stdout.write(summary_text(reports))
    return EXIT_OK if n_pass == len(reports) else EXIT_FAIL


# ---------------------------------------------------------------------------
# curve and selfcheck
# ---------------------------------------------------------------------------


def cmd_curve(cfg: RunConfig) -> int:
    started = time.perf_counter()
    _require(cfg, "model", "grid", "prior")
    if not cfg.time.t_values:
        raise ConfigError("curve needs a non-empty [time].t_values")
    if cfg.model.kernel is None:
        raise UnsupportedModelError("curve needs a model with a closed-form kernel")
    out = _prepare_output(cfg, "curve")
    points = immse_curve(cfg.model, cfg.prior, cfg.time.t_values)
    files: dict = {}
    _write(out, "curve.csv", curve_to_csv(points), files)
    _write_manifest(out, cfg, "curve", files, {"points": len(points)}, started)
    return EXIT_OK


def cmd_selfcheck(cfg: RunConfig) -> int:
    started = time.perf_counter()
    _require(cfg, "model", "time.t")
    if cfg.model.kernel is None:
        raise UnsupportedModelError("selfcheck needs a model with a closed-form kernel")
    if cfg.model.support_kind == "positive-half-line":
        x0s = (0.5, 1.0, 2.0)
    else:
        x0s = (-1.0, 0.0, 1.0)
    out = _prepare_output(cfg, "selfcheck")
    reports = [kernel_selfcheck(cfg.model.kernel, cfg.model, x0, cfg.time.t) for x0 in x0s]
    files: dict = {}
    _write(out, "reports.csv", reports_to_csv(reports), files)
    _write(out, "summary.txt", summary_text(reports), files)
    n_pass = sum(r.passed for r in reports)
    _write_manifest(out, cfg, "selfcheck", files, {"passed": n_pass, "total": len(reports)}, started)
    sys.stdout.write(summary_text(reports))
    return EXIT_OK if n_pass == len(reports) else EXIT_FAIL


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "curve": cmd_curve, "selfcheck": cmd_selfcheck}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _Usage(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fokker-lab", description="information-estimation checks for diffusion SDEs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run config")
        p.add_argument("--output-dir", help="override output_dir")
        p.add_argument("--seed", type=int, help="override seed")
        p.add_argument("--threads", type=int, help="override threads")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. time.t=2 (repeatable)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _Usage:
        return EXIT_USAGE
    overrides = list(args.set)
    if args.output_dir is not None:
        overrides.append(f'output_dir="{args.output_dir}"')
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (ConfigError, UnsupportedModelError, PreconditionError) as exc:
        sys.stderr.write(f"fokker-lab: config error: {exc}\n")
        return EXIT_USAGE
    except FokkerLabError as exc:
        sys.stderr.write(f"fokker-lab: runtime error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
