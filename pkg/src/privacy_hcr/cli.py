"""Command line interface: ``privacy-hcr {bound,estimate,simulate,montecarlo,sweep}``.

Exit codes: 0 success, 2 input/config error, 3 numeric-domain error.
"""

from __future__ import annotations

import argparse
import sys as _sys
from dataclasses import replace
from typing import Optional, Sequence, TextIO

import numpy as np

from . import __version__
from .bound import hcr_bound
from .config import ScenarioConfig, fmt, read_measurements, write_csv
from .errors import ConfigError, EstimationError, NumericDomainError
from .estimator import estimate_change
from .lti import DiscreteLTISystem, StepScenario, simulate_noiseless, simulate_noisy
from .montecarlo import run_trials, snr

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3

SWEEP_PARAMS = ("sigma2", "a", "dt", "N")


def _num(x: float) -> str:
    return f"{x:.6g}"


def parse_mode(text: str) -> Optional[float]:
    """``ls`` -> ``None`` (least-squares amplitude); ``fixed:VALUE`` -> ``VALUE``."""
    if text == "ls":
        return None
    if text.startswith("fixed:"):
        try:
            return float(text[len("fixed:"):])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"mode must be 'ls' or 'fixed:VALUE', got {text!r}")


def parse_sweep(text: str) -> tuple[str, np.ndarray]:
    """``param:start:stop:steps`` -> (param, grid) with an inclusive linear grid."""
    parts = text.split(":")
    if len(parts) != 4 or parts[0] not in SWEEP_PARAMS:
        raise ConfigError(
            f"--sweep must be param:start:stop:steps with param in {SWEEP_PARAMS}, got {text!r}")
    try:
        start, stop, steps = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise ConfigError(f"--sweep has non-numeric bounds or step count: {text!r}") from None
    if steps < 1:
        raise ConfigError(f"--sweep needs at least one grid point, got {steps}")
    grid = np.linspace(start, stop, steps)
    if parts[0] == "N":
        if not np.allclose(grid, np.round(grid)):
            raise ConfigError(f"--sweep over N needs an integer grid, got {grid.tolist()}")
        grid = np.round(grid)
    return parts[0], grid


def _parse_x0(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--x0 must be comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model JSON file")
    common.add_argument("--scenario", help="optional scenario sidecar JSON file")
    common.add_argument("--k-star", type=int, dest="k_star", help="change time k*")
    common.add_argument("--horizon", type=int, dest="N", help="horizon N (outputs y_0..y_N)")
    common.add_argument("--x0", type=_parse_x0, help="initial state, comma separated")
    common.add_argument("--amplitude", type=float, help="step amplitude (default 1)")
    common.add_argument("--sigma2", type=float, dest="sigma2_override", help="override noise variance")
    common.add_argument("--dt", type=float, dest="dt_override", help="override sample period [min]")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--trials", type=int, dest="n_trials", help="Monte Carlo trials")
    common.add_argument("--mode", type=parse_mode, default=None, dest="fixed_amplitude",
                        metavar="ls|fixed:VALUE", help="amplitude handling of the estimator")
    common.add_argument("--out", help="output CSV path")

    parser = argparse.ArgumentParser(
        prog="privacy-hcr",
        description="Variance lower bounds and least-squares attacks on step change times.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bound", parents=[common], help="lower bound on the change-time variance")
    p = sub.add_parser("estimate", parents=[common], help="estimate the change time from a k,y CSV")
    p.add_argument("--data", required=True, help="measurement CSV with header k,y")
    p = sub.add_parser("simulate", parents=[common], help="write a simulated k,y CSV")
    p.add_argument("--noisy", action="store_true", help="add seeded Gaussian noise")
    sub.add_parser("montecarlo", parents=[common], help="empirical variance over seeded trials")
    p = sub.add_parser("sweep", parents=[common], help="bound (and optionally variance) over a grid")
    p.add_argument("--sweep", required=True, dest="sweep_spec", metavar="param:start:stop:steps")
    return parser


def _config(args: argparse.Namespace) -> ScenarioConfig:
    flags = {k: getattr(args, k, None) for k in
             ("k_star", "N", "x0", "amplitude", "sigma2_override", "dt_override",
              "seed", "n_trials", "fixed_amplitude")}
    if getattr(args, "noisy", False):
        flags["noisy"] = True
    return ScenarioConfig.load(args.model, args.scenario, **flags)


def cmd_bound(cfg: ScenarioConfig, out: Optional[str], stream: TextIO):
    cfg.require("k_star", "N")
    sys = cfg.system
    rep = hcr_bound(sys, cfg.k_star, cfg.N)
    print(f"k_star: {rep.k_star}", file=stream)
    print(f"N: {rep.N}", file=stream)
    print(f"tau_star: {rep.tau_star}", file=stream)
    print(f"S(tau_star): {_num(rep.s_at_tau_star)}", file=stream)
    print(f"bound: {_num(rep.bound_steps2)} steps^2", file=stream)
    print(f"bound: {_num(rep.bound_phys)} min^2 (dt = {_num(sys.dt)} min)", file=stream)
    if rep.overflow_mode:
        print("note: log-domain evaluation used for large S", file=stream)
    if out:
        write_csv(out, ["tau", "S", "quotient_steps2"],
                  ((int(t), float(s), float(q)) for t, s, q in zip(rep.taus, rep.s_values, rep.quotients)),
                  cfg.resolved(command="bound"))
    return rep


def cmd_estimate(cfg: ScenarioConfig, csv_path: str, out: Optional[str], stream: TextIO):
    y = read_measurements(csv_path)
    N = y.size - 1
    if cfg.N is not None and cfg.N != N:
        raise ConfigError(f"{csv_path}: expected N+1 = {cfg.N + 1} rows, got {y.size}")
    res = estimate_change(y, cfg.system, x0=cfg.x0, fixed_amplitude=cfg.fixed_amplitude)
    print(f"N: {N}", file=stream)
    print(f"k_hat: {res.k_hat}", file=stream)
    print(f"k_hat_minutes: {_num(res.k_hat * cfg.system.dt)} min", file=stream)
    print(f"u_hat: {_num(res.u_hat)}", file=stream)
    if res.excluded:
        print(f"excluded_candidates: {list(res.excluded)}", file=stream)
    if out:
        write_csv(out, ["kappa", "u_hat", "residual"], res.table(),
                  cfg.resolved(command="estimate", data=csv_path))
    return res


def cmd_simulate(cfg: ScenarioConfig, out: Optional[str], stream: TextIO):
    if not out:
        raise ConfigError("simulate needs --out")
    sc = cfg.scenario()
    if cfg.noisy:
        series = simulate_noisy(cfg.system, sc, cfg.seed)
    else:
        series = simulate_noiseless(cfg.system, sc)
    write_csv(out, ["k", "y"], ((k, float(v)) for k, v in enumerate(series.values)),
              cfg.resolved(command="simulate"))
    print(f"wrote {series.values.size} samples to {out}", file=stream)
    return series


def cmd_montecarlo(cfg: ScenarioConfig, out: Optional[str], stream: TextIO):
    sc = cfg.scenario()
    sys = cfg.system
    rep = hcr_bound(sys, sc.k_star, sc.N)
    summary = run_trials(sys, sc, cfg.n_trials, cfg.seed, cfg.fixed_amplitude)
    dt2 = sys.dt * sys.dt
    print(f"trials: {summary.n_trials} (seed {summary.master_seed})", file=stream)
    print(f"sigma2: {_num(sys.sigma2)}", file=stream)
    print(f"SNR: {_num(snr(sys, sc))}", file=stream)
    print(f"empirical_variance: {_num(summary.empirical_variance)} steps^2", file=stream)
    print(f"empirical_variance: {_num(summary.variance_phys)} min^2", file=stream)
    print(f"variance_stderr: {_num(summary.variance_se)} steps^2", file=stream)
    print(f"empirical_bias: {_num(summary.empirical_bias)} steps", file=stream)
    print(f"excluded_trials: {summary.excluded_trials}", file=stream)
    print(f"bound: {_num(rep.bound_steps2)} steps^2", file=stream)
    print(f"bound: {_num(rep.bound_phys)} min^2", file=stream)
    holds = summary.empirical_variance + 3 * summary.variance_se >= rep.bound_steps2
    print(f"bound_holds: {'yes' if holds else 'no'}", file=stream)
    if out:
        write_csv(out, ["k", "count"], sorted(summary.histogram.items()),
                  cfg.resolved(command="montecarlo", bound_min2=rep.bound_phys,
                               empirical_variance_min2=summary.empirical_variance * dt2))
    return summary


def _sweep_point(cfg: ScenarioConfig, param: str, value: float) -> tuple[DiscreteLTISystem, StepScenario]:
    sys = cfg.system
    cfg.require("k_star", "N")
    k_star, N = cfg.k_star, cfg.N
    if param == "sigma2":
        sys = sys.with_noise(value)
    elif param == "a":
        if sys.n != 1:
            raise ConfigError(f"sweep over 'a' needs a one-state model, got n={sys.n}")
        sys = replace(sys, A=[[value]])
    elif param == "N":
        N = int(value)
    elif param == "dt":
        if cfg.continuous is None:
            raise ConfigError("sweep over 'dt' needs a model with a 'continuous' {f, h, c} block")
        if not value > 0:
            raise NumericDomainError(f"sample period must be > 0, got {value}")
        # hold the wall-clock window and change instant fixed
        window, t_change = N * sys.dt, k_star * sys.dt
        N = max(1, int(round(window / value)))
        k_star = min(int(round(t_change / value)), N - 1)
        sys = cfg.continuous.sample(value, sys.sigma2)
    return sys, StepScenario(k_star, N, cfg.x0, cfg.amplitude)


def cmd_sweep(cfg: ScenarioConfig, sweep_spec: str, out: Optional[str], stream: TextIO,
              with_variance: bool = False):
    param, grid = parse_sweep(sweep_spec)
    header = [param, "k_star", "N", "dt_min", "tau_star", "S_tau_star", "bound_steps2", "bound_min2"]
    if with_variance:
        header += ["variance_steps2", "variance_min2", "variance_stderr_steps2"]
    rows = []
    for value in grid:
        sys, sc = _sweep_point(cfg, param, float(value))
        rep = hcr_bound(sys, sc.k_star, sc.N)
        row = [int(value) if param == "N" else float(value), sc.k_star, sc.N, sys.dt,
               rep.tau_star, rep.s_at_tau_star, rep.bound_steps2, rep.bound_phys]
        if with_variance:
            s = run_trials(sys, sc, cfg.n_trials, cfg.seed, cfg.fixed_amplitude)
            row += [s.empirical_variance, s.variance_phys, s.variance_se]
        rows.append(row)
    config = cfg.resolved(command="sweep", sweep=sweep_spec)
    if out:
        write_csv(out, header, rows, config)
        print(f"wrote {len(rows)} rows to {out}", file=stream)
    else:
        print(",".join(header), file=stream)
        for row in rows:
            print(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row), file=stream)
    return rows


def main(argv: Optional[Sequence[str]] = None, stream: Optional[TextIO] = None) -> int:
    stream = stream or _sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "bound":
            cmd_bound(cfg, args.out, stream)
        elif args.command == "estimate":
            cmd_estimate(cfg, args.data, args.out, stream)
        elif args.command == "simulate":
            cmd_simulate(cfg, args.out, stream)
        elif args.command == "montecarlo":
            cmd_montecarlo(cfg, args.out, stream)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.sweep_spec, args.out, stream, with_variance=args.n_trials is not None)
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except (NumericDomainError, EstimationError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    _sys.exit(main())
