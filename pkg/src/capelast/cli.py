"""Command-line entry point.

Subcommands:
  simulate     run a configured evolution, write diagnostics and snapshots
  verify       run a residual battery and gate on its tolerances
  sweep-sigma  run the surface-tension sweep with the sign-condition gate

Exit codes: 0 success, 1 verification/physics failure, 2 usage or config
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from . import __version__
from .config import config_to_text, load_config
from .diagnostics import CSV_COLUMNS
from .errors import CapelastError, ConfigError, InsufficientHistoryError
from .recipes import RandomRecipe
from .sigma_sweep import limit_compare, sweep_sigma
from .verify import CSV_HEADER, run_battery

log = logging.getLogger(__name__)


def _build_parser():
    p = argparse.ArgumentParser(
        prog="capelast",
        description="free-surface incompressible neo-Hookean elastodynamics "
                    "in graph coordinates")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configured evolution")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    _common_overrides(sim)

    ver = sub.add_parser("verify", help="run a residual battery")
    ver.add_argument("--suite", required=True,
                     choices=["operators", "lemmas", "alinhac", "elliptic"])
    ver.add_argument("--out", default=None)
    ver.add_argument("--nx", type=int, default=32)
    ver.add_argument("--ny", type=int, default=32)
    ver.add_argument("--nz", type=int, default=17)
    ver.add_argument("--hist", type=int, default=6,
                     help="history length for time-derivative identities")

    sw = sub.add_parser("sweep-sigma", help="surface-tension sweep")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--sigmas", default=None,
                    help="comma-separated, non-increasing, e.g. 0.1,0.01,0")
    _common_overrides(sw)
    return p


def _common_overrides(sp):
    sp.add_argument("--nx", type=int, default=None)
    sp.add_argument("--ny", type=int, default=None)
    sp.add_argument("--nz", type=int, default=None)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--snapshot-every", type=int, default=None)


def _apply_overrides(cfg, args):
    init = cfg.init
    init_kw = {}
    for key in ("nx", "ny", "nz"):
        val = getattr(args, key, None)
        if val is not None:
            init_kw[key] = val
    if args.seed is not None:
        init_kw["seed"] = args.seed

        def reseed(r):
            if isinstance(r, RandomRecipe):
                return dataclasses.replace(r, seed=args.seed)
            return r

        init_kw["v_recipe"] = reseed(init.v_recipe)
        init_kw["F_recipes"] = tuple(reseed(r) for r in init.F_recipes)
    if init_kw:
        init = dataclasses.replace(init, **init_kw)
    cfg_kw = {"init": init}
    if args.dt is not None:
        cfg_kw["dt"] = args.dt
    if getattr(args, "snapshot_every", None) is not None:
        cfg_kw["snapshot_every"] = args.snapshot_every
    return dataclasses.replace(cfg, **cfg_kw)


def _write_diagnostics(path, diagnostics):
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in diagnostics:
            fh.write(rec.csv_row() + "\n")


def cmd_simulate(args) -> int:
    from .evolve import run
    from .state import save_state

    cfg, _ = load_config(args.config)
    cfg = _apply_overrides(cfg, args)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.echo.ini"), "w") as fh:
        fh.write(config_to_text(cfg))
    result = run(cfg)
    _write_diagnostics(os.path.join(args.out, "diagnostics.csv"),
                       result.diagnostics)
    for idx, (t, snap) in enumerate(zip(result.snapshot_times,
                                        result.snapshots)):
        save_state(snap, result.grid, os.path.join(args.out,
                                                   f"snapshot_{idx:04d}"))
    if result.aborted:
        print(f"run aborted: {result.aborted}", file=sys.stderr)
        return 1
    print(f"completed t = {result.final.t:g} with "
          f"{len(result.diagnostics) - 1} steps; output in {args.out}")
    return 0


def cmd_verify(args) -> int:
    kwargs = {}
    if args.suite in ("operators", "lemmas"):
        kwargs = dict(nx=args.nx, ny=args.ny, nz=args.nz)
    elif args.suite == "alinhac":
        kwargs = dict(nx=args.nx, ny=args.ny, nz=args.nz,
                      hist_len=args.hist)
    rows = run_battery(args.suite, **kwargs)
    lines = [CSV_HEADER] + [r.csv() for r in rows]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"verify_{args.suite}.csv")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    failed = [r for r in rows if not r.passed]
    if failed:
        print(f"{len(failed)} residual(s) above tolerance", file=sys.stderr)
        return 1
    return 0


def cmd_sweep_sigma(args) -> int:
    cfg, sweep_opts = load_config(args.config)
    cfg = _apply_overrides(cfg, args)
    if args.sigmas:
        sigmas = [float(s) for s in args.sigmas.split(",")]
    elif "sigmas" in sweep_opts:
        sigmas = sweep_opts["sigmas"]
    else:
        raise ConfigError("no sigma list: pass --sigmas or a [sweep] section")
    if "rt_c0" in sweep_opts:
        cfg = dataclasses.replace(cfg, rt_c0=sweep_opts["rt_c0"])

    positive = [s for s in sigmas if s > 0]
    report = sweep_sigma(cfg, positive if 0.0 in sigmas else sigmas)
    if 0.0 in sigmas and not report.aborted:
        zero_cfg = dataclasses.replace(
            cfg, init=dataclasses.replace(cfg.init, sigma=0.0))
        from .evolve import run
        zero = run(zero_cfg)
        if zero.aborted:
            report.aborted = True
            report.verdict = "void (sigma=0 member aborted)"
        else:
            report = limit_compare(report, zero)

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep.csv"), "w") as fh:
        fh.write("\n".join(report.csv_rows()) + "\n")
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(report.summary() + "\n")
    print(report.summary())
    return 1 if report.aborted else 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "sweep-sigma":
            return cmd_sweep_sigma(args)
    except (ConfigError, InsufficientHistoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapelastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
