"""Command-line front end: run scenarios, compare CSVs, measure orders."""

from __future__ import annotations

import argparse
import sys as _sys

from .errors import EmtsimError
from .scenarios import (INTEGRATORS, METHODS, SCENARIOS, ScenarioConfig,
                        convergence_study, run_scenario)
from .series import compare, read_csv


def _add_run(sub):
    p = sub.add_parser("run", help="simulate a scenario and write a CSV")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--integrator", choices=("itm", "obreshkov22"), default=None)
    p.add_argument("--step-size", type=float, default=None)
    p.add_argument("--eps-fraction", type=float, default=None)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--config", default=None,
                   help="key = value config file; flags override its entries")


def _add_compare(sub):
    p = sub.add_parser("compare", help="error metrics of a run vs a reference CSV")
    p.add_argument("--run", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--signal", default=None, help="one signal (default: all shared)")
    p.add_argument("--window", required=True, help="t0,t1 in seconds")


def _add_converge(sub):
    p = sub.add_parser("converge", help="observed order of accuracy by step halving")
    p.add_argument("--scenario", choices=("decay", "fig1"), required=True)
    p.add_argument("--integrator", choices=tuple(INTEGRATORS), required=True)
    p.add_argument("--steps", required=True, help="comma-separated halving step sizes")


def _run_cmd(args) -> int:
    if args.config:
        cfg = ScenarioConfig.from_file(args.config)
    else:
        if not args.scenario:
            raise EmtsimError("run needs --scenario (or --config)")
        cfg = ScenarioConfig(scenario=args.scenario)
    overrides = {}
    for attr, flag in (("scenario", args.scenario), ("method", args.method),
                       ("integrator", args.integrator),
                       ("step_size", args.step_size),
                       ("eps_fraction", args.eps_fraction),
                       ("t_end", args.t_end), ("output_path", args.out)):
        if flag is not None:
            overrides[attr] = flag
    if overrides:
        cfg = ScenarioConfig(**{**cfg.__dict__, **overrides})
    series = run_scenario(cfg)
    dest = cfg.output_path or "(not written)"
    print(f"{cfg.scenario}/{cfg.method}: {len(series)} records, "
          f"{len(series.names)} signals -> {dest}")
    return 0


def _compare_cmd(args) -> int:
    t0, _, t1 = args.window.partition(",")
    try:
        window = (float(t0), float(t1))
    except ValueError as exc:
        raise EmtsimError(f"bad --window {args.window!r}: {exc}") from exc
    run = read_csv(args.run)
    ref = read_csv(args.reference)
    report = compare(run, ref, args.signal, window)
    for name, err in report.errors.items():
        print(f"{name}: max_abs={err.max_abs:.6e} rms={err.rms:.6e}")
    return 0


def _converge_cmd(args) -> int:
    try:
        steps = [float(s) for s in args.steps.split(",")]
    except ValueError as exc:
        raise EmtsimError(f"bad --steps {args.steps!r}: {exc}") from exc
    study = convergence_study(args.scenario, args.integrator, steps)
    for h, err in zip(study.step_sizes, study.errors):
        print(f"h={h:.6g}  error={err:.6e}")
    for s in study.slopes:
        print(f"slope={s:.3f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="emtsim",
        description="Transient DAE simulation with switching-event restart "
                    "strategies")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_compare(sub)
    _add_converge(sub)
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _run_cmd(args)
        if args.command == "compare":
            return _compare_cmd(args)
        return _converge_cmd(args)
    except (EmtsimError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
