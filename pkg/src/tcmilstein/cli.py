"""Command-line front end.

Subcommands: ``convergence`` (coupled strong-error experiment, CSV plus
optional SVG), ``simulate`` (one trajectory dump), ``check-assumptions``
(sampling diagnostics), and ``subordinator-test`` (Laplace-transform check
of the stable increment sampler).

Configuration comes from defaults, an optional flat ``section.key = value``
file, the TCM_SEED environment variable, then command-line flags, in
increasing precedence.
"""

from __future__ import annotations

import argparse
import datetime
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import mc_harness, problems, report
from .errors import ConfigError, NumericOverflowError, ResourceLimitError
from .mc_harness import fit_convergence_order, ladder_factors, strong_error_table, trajectory_rng
from .scheme import SchemeTag, simulate_path
from .subordinator import SubordinatorModel, build_time_change_grid
from .truncation import TruncationConfig

DEFAULT_LADDER = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class RunConfig:
    problem: str = "example1"
    subordinator: str = "stable"
    alpha: float = 0.9
    scale: float = 1.0
    ladder: tuple = DEFAULT_LADDER
    h_ref: float = 1e-5
    m: int = 100
    p_bar: float = 2.0
    epsilon: float = 0.02
    mu_coeff: float = 2.0
    mu_exponent: float = 5.0
    kappa_floor: bool = False
    seed: int = 42
    outdir: str = "."
    scheme: str = "milstein"
    skip_blowups: bool = False
    threads: int = 0  # 0 means machine parallelism
    chunk_size: int = 64
    reference: str = "fine"
    gbm_drift: float = 0.1
    gbm_vol: float = 0.2


# config-file key -> RunConfig field
_KEYMAP = {
    "run.problem": "problem",
    "run.ladder": "ladder",
    "run.h_ref": "h_ref",
    "run.m": "m",
    "run.p_bar": "p_bar",
    "run.seed": "seed",
    "run.outdir": "outdir",
    "run.scheme": "scheme",
    "run.skip_blowups": "skip_blowups",
    "run.threads": "threads",
    "run.chunk_size": "chunk_size",
    "run.reference": "reference",
    "sub.family": "subordinator",
    "sub.alpha": "alpha",
    "sub.scale": "scale",
    "trunc.mu_coeff": "mu_coeff",
    "trunc.mu_exponent": "mu_exponent",
    "trunc.epsilon": "epsilon",
    "trunc.kappa_floor": "kappa_floor",
    "gbm.drift": "gbm_drift",
    "gbm.vol": "gbm_vol",
}


def _parse_ladder(text: str) -> tuple:
    try:
        values = tuple(float(part) for part in str(text).split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"run.ladder: {exc}") from None
    if not values:
        raise ConfigError("run.ladder: needs at least one step size")
    return values


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot interpret '{text}' as a boolean")


def _read_config_file(path: str) -> dict:
    values = {}
    text = Path(path).read_text()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'section.key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _KEYMAP:
            raise ConfigError(f"{path}:{ln}: unknown configuration key '{key}'")
        values[_KEYMAP[key]] = val
    return values


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value):
    if name == "ladder":
        return value if isinstance(value, tuple) else _parse_ladder(value)
    kind = _FIELD_TYPES[name]
    try:
        if kind == "bool":
            return _parse_bool(value)
        if kind == "int":
            return int(float(value))
        if kind == "float":
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return str(value)


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.problem not in ("example1", "example2", "gbm"):
        raise ConfigError(f"run.problem: unknown problem '{cfg.problem}'")
    if cfg.subordinator not in ("stable", "deterministic"):
        raise ConfigError(f"sub.family: unknown family '{cfg.subordinator}'")
    if cfg.subordinator == "stable" and not 0.0 < cfg.alpha < 1.0:
        raise ConfigError(f"sub.alpha: stable index must lie in (0,1), got {cfg.alpha}")
    if cfg.scale <= 0.0:
        raise ConfigError(f"sub.scale: must be positive, got {cfg.scale}")
    if not 0.0 < cfg.epsilon <= 0.25:
        raise ConfigError(f"trunc.epsilon: must lie in (0, 1/4], got {cfg.epsilon}")
    if cfg.mu_coeff <= 0.0 or cfg.mu_exponent <= 0.0:
        raise ConfigError("trunc.mu_coeff and trunc.mu_exponent must be positive")
    if cfg.m < 1:
        raise ConfigError(f"run.m: need at least one trajectory, got {cfg.m}")
    if cfg.p_bar < 2.0:
        raise ConfigError(f"run.p_bar: must be >= 2, got {cfg.p_bar}")
    if cfg.seed < 0:
        raise ConfigError(f"run.seed: must be non-negative, got {cfg.seed}")
    if cfg.scheme not in ("milstein", "em"):
        raise ConfigError(f"run.scheme: must be 'milstein' or 'em', got '{cfg.scheme}'")
    if cfg.reference not in ("fine", "exact"):
        raise ConfigError(f"run.reference: must be 'fine' or 'exact', got '{cfg.reference}'")
    if not 0.0 < cfg.h_ref <= 1.0:
        raise ConfigError(f"run.h_ref: must lie in (0,1], got {cfg.h_ref}")
    try:
        ladder_factors(cfg.ladder, cfg.h_ref)
    except ValueError as exc:
        raise ConfigError(f"run.ladder: {exc}") from None
    return cfg


def parse_config(config_file: str | None, overrides: dict) -> RunConfig:
    """Merge defaults, config file, TCM_SEED, and explicit flags."""
    merged: dict = {}
    if config_file is not None:
        for name, value in _read_config_file(config_file).items():
            merged[name] = _coerce(name, value)
    env_seed = os.environ.get("TCM_SEED")
    if env_seed is not None:
        merged["seed"] = _coerce("seed", env_seed)
    for name, value in overrides.items():
        if value is not None:
            merged[name] = _coerce(name, value)
    return _validate(replace(RunConfig(), **merged))


def _overrides_from(args: argparse.Namespace) -> dict:
    names = set(_FIELD_TYPES)
    return {k: v for k, v in vars(args).items() if k in names}


def _make_model(cfg: RunConfig) -> SubordinatorModel:
    if cfg.subordinator == "deterministic":
        return SubordinatorModel.deterministic()
    return SubordinatorModel.stable(alpha=cfg.alpha, scale=cfg.scale)


def _make_problem(cfg: RunConfig):
    if cfg.problem == "gbm":
        return problems.gbm(drift=cfg.gbm_drift, vol=cfg.gbm_vol)
    return problems.by_name(cfg.problem)


def _make_trunc(cfg: RunConfig) -> TruncationConfig:
    return TruncationConfig(
        mu_coeff=cfg.mu_coeff,
        mu_exponent=cfg.mu_exponent,
        epsilon=cfg.epsilon,
        kappa_floor_enabled=cfg.kappa_floor,
    )


def _threads(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_convergence(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, _overrides_from(args))
    problem = _make_problem(cfg)
    table = strong_error_table(
        problem,
        _make_trunc(cfg),
        _make_model(cfg),
        cfg.ladder,
        cfg.h_ref,
        cfg.m,
        cfg.p_bar,
        cfg.seed,
        scheme_tag=SchemeTag(cfg.scheme),
        reference=cfg.reference,
        threads=_threads(cfg),
        chunk_size=cfg.chunk_size,
        skip_blowups=cfg.skip_blowups,
    )
    reg = fit_convergence_order(table)
    out = _outdir(cfg)
    stamp = None
    if not args.no_timestamp:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    csv_path = out / f"{cfg.problem}_convergence.csv"
    report.write_error_table(table, reg, csv_path, timestamp=stamp)
    if args.plot:
        report.plot_convergence(table, reg, out / f"{cfg.problem}_convergence.svg")
    print(f"slope {reg.slope:.15g}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, _overrides_from(args))
    if not 0.0 < args.h <= 1.0:
        raise ConfigError(f"--h: step size must lie in (0,1], got {args.h}")
    problem = _make_problem(cfg)
    model = _make_model(cfg)
    grid = build_time_change_grid(model, args.h, problem.T, trajectory_rng(cfg.seed, 0, 0))
    dw = trajectory_rng(cfg.seed, 0, 1).standard_normal(grid.N) * math.sqrt(args.h)
    traj = simulate_path(problem, _make_trunc(cfg), grid, dw, SchemeTag(cfg.scheme))
    out = _outdir(cfg)
    traj_path = out / f"{cfg.problem}_trajectory.csv"
    report.write_trajectory(traj, traj_path)
    if args.grid_out:
        report.write_grid(grid, args.grid_out)
    print(f"wrote {grid.N + 1} states to {traj_path}")
    return 0


def cmd_check_assumptions(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, _overrides_from(args))
    candidates = None
    if args.candidate:
        candidates = {}
        for item in args.candidate:
            if "=" not in item:
                raise ConfigError(f"--candidate: expected id=value, got '{item}'")
            key, val = item.split("=", 1)
            candidates[key.strip()] = float(val)
    spec = problems.SamplingSpec(
        radius=args.radius,
        samples=args.samples,
        p=args.p,
        q=args.q,
        seed=cfg.seed,
        candidates=candidates,
    )
    reports = problems.check_assumptions(_make_problem(cfg), spec)
    print(report.format_assumption_table(reports))
    out = _outdir(cfg)
    report.write_assumption_reports(reports, out / f"{cfg.problem}_assumptions.csv")
    return 0


def cmd_subordinator_test(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, _overrides_from(args))
    model = SubordinatorModel.stable(alpha=cfg.alpha, scale=cfg.scale)
    lams = [float(part) for part in args.lambdas.split(",") if part.strip()]
    from .subordinator import sample_increments

    draws = sample_increments(model, args.h, args.samples, trajectory_rng(cfg.seed, 0, 0))
    failures = 0
    for lam in lams:
        vals = np.exp(-lam * draws)
        mean = float(vals.mean())
        target = math.exp(-args.h * cfg.scale * lam**cfg.alpha)
        se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
        z = abs(mean - target) / se if se > 0 else 0.0
        verdict = "PASS" if z <= 3.0 else "FAIL"
        failures += verdict == "FAIL"
        print(
            f"lambda={lam:g}: mean={mean:.8f} target={target:.8f} "
            f"stderr={se:.2e} z={z:.2f} {verdict}"
        )
    print(f"{len(lams) - failures}/{len(lams)} checks within 3 standard errors")
    return 0 if failures == 0 else 1


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat 'section.key = value' configuration file")
    sub.add_argument("--problem", choices=("example1", "example2", "gbm"))
    sub.add_argument("--subordinator", choices=("stable", "deterministic"),
                     help="driving clock family")
    sub.add_argument("--alpha", type=float, help="stable index in (0,1)")
    sub.add_argument("--scale", type=float, help="Laplace exponent scale")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--outdir")
    sub.add_argument("--scheme", choices=("milstein", "em"))
    sub.add_argument("--epsilon", type=float, help="truncation schedule exponent, in (0, 1/4]")
    sub.add_argument("--mu-coeff", dest="mu_coeff", type=float)
    sub.add_argument("--mu-exponent", dest="mu_exponent", type=float)
    sub.add_argument("--kappa-floor", dest="kappa_floor", action="store_const", const=True,
                     help="clamp the truncation schedule from below at mu(1)")
    sub.add_argument("--gbm-drift", dest="gbm_drift", type=float)
    sub.add_argument("--gbm-vol", dest="gbm_vol", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcmilstein",
        description="Truncated Milstein experiments for time-changed SDEs",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    conv = subs.add_parser("convergence", help="coupled strong-error experiment")
    _add_common(conv)
    conv.add_argument("--ladder", dest="ladder", help="comma-separated step sizes")
    conv.add_argument("--href", dest="h_ref", type=float, help="reference step size")
    conv.add_argument("-M", "--trajectories", dest="m", type=int)
    conv.add_argument("--pbar", dest="p_bar", type=float, help="error norm exponent")
    conv.add_argument("--reference", choices=("fine", "exact"))
    conv.add_argument("--threads", type=int)
    conv.add_argument("--chunk-size", dest="chunk_size", type=int)
    conv.add_argument("--skip-blowups", dest="skip_blowups", action="store_const", const=True)
    conv.add_argument("--plot", action="store_true", help="render the log-log SVG figure")
    conv.add_argument("--no-timestamp", action="store_true",
                      help="omit the timestamp comment for byte-reproducible output")
    conv.set_defaults(func=cmd_convergence)

    sim = subs.add_parser("simulate", help="simulate and dump one trajectory")
    _add_common(sim)
    sim.add_argument("--h", type=float, required=True, help="internal step size")
    sim.add_argument("--grid-out", dest="grid_out", help="also dump the clock grid CSV here")
    sim.set_defaults(func=cmd_simulate)

    chk = subs.add_parser("check-assumptions", help="sampling diagnostics on a box")
    _add_common(chk)
    chk.add_argument("--radius", type=float, required=True)
    chk.add_argument("--samples", type=int, required=True)
    chk.add_argument("--p", type=float, default=3.0)
    chk.add_argument("--q", type=float, default=3.0)
    chk.add_argument("--candidate", action="append",
                     help="candidate constant as id=value (repeatable)")
    chk.set_defaults(func=cmd_check_assumptions)

    sub_t = subs.add_parser("subordinator-test", help="Laplace-transform sampler check")
    _add_common(sub_t)
    sub_t.add_argument("--samples", type=int, default=1_000_000)
    sub_t.add_argument("--h", type=float, default=0.01)
    sub_t.add_argument("--lambdas", default="0.5,1,2")
    sub_t.set_defaults(func=cmd_subordinator_test)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, ResourceLimitError, NumericOverflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
