"""Command-line entry point: ``python -m stressdiff <command>`` or ``stressdiff <command>``.

Every failure ends with one JSON line on stderr,
``{"error": <type>, "exit_code": <n>, "message": <text>}``, and the exit
codes are 0 success, 2 configuration error, 3 runtime failure, 4 I/O error.
"""

import argparse
from dataclasses import replace
import json
import logging
from pathlib import Path
import sys

import numpy as np

from . import diagnostics as dg
from . import io
from .config import OUTPUT_ROOT_ENV, dump_config, load_config
from .derivation import CheckRow, verify_trajectories
from .errors import ConfigError, StressDiffError
from .grid import GridSpec
from .mms import ErrorRow, Rung, convergence_study, default_solution
from .solver import SolverOptions, run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4
CONFIG_NAME = "config.toml"


class _Console:
    def __init__(self, quiet):
        self.quiet = quiet

    def say(self, text):
        if not self.quiet:
            print(text)


def _with_seed(cfg, seed):
    if seed is None:
        return cfg
    return replace(cfg, initial=replace(cfg.initial, seed=seed))


def _config_path(args):
    path = args.config_pos or args.config
    if not path:
        raise ConfigError("no config given (positional argument or --config)")
    return path


def _energy_rows(states, p):
    rows = []
    for s in states:
        led = dg.energy_ledger(s, p)
        rows.append([s.time, *led.row()])
    return ["time", *dg.EnergyLedger.columns()], rows


# -- commands -----------------------------------------------------------------------

def cmd_validate(args, out):
    cfg = _with_seed(load_config(_config_path(args)), args.seed)
    out.say(f"ok theorem_mode={str(cfg.theorem_mode).lower()}")
    return EXIT_OK


def cmd_simulate(args, out):
    cfg = _with_seed(load_config(_config_path(args)), args.seed)
    if args.snapshots_every is not None:
        cfg = replace(cfg, run=replace(cfg.run, snapshot_every=args.snapshots_every))
    outdir = io.ensure_dir(cfg.resolved_output(args.out))
    p = cfg.params
    initial = cfg.initial.build(cfg.grid, p)
    cadence = cfg.run.snapshot_every or (1 if cfg.diagnostics.needs_window else 0)

    tracker = dg.NormTracker()
    if cfg.diagnostics.norms:
        tracker.update(initial, p)
    callbacks = [lambda s: tracker.update(s, p)] if cfg.diagnostics.norms else []
    opts = SolverOptions(cfl=cfg.run.cfl, picard=cfg.run.picard, track_energy=cfg.diagnostics.energy)
    res = run(initial, p, cfg.run.t_end, callbacks, dt=cfg.run.dt, options=opts,
              snapshot_every=cadence or None)

    (outdir / CONFIG_NAME).write_text(dump_config(cfg), encoding="utf-8")
    io.write_csv(outdir / "steps.csv", ["step", "time", "dt", "picard_iterations", "halvings"],
                 [[i + 1, r.time, r.dt_used, r.picard_iterations, r.halvings]
                  for i, r in enumerate(res.reports)])
    if cfg.diagnostics.energy:
        led0 = dg.energy_ledger(initial, p)
        rows = [[initial.time, *led0.row()]] + [[r.time, *r.energy_after.row()] for r in res.reports]
        io.write_csv(outdir / "energy.csv", ["time", *dg.EnergyLedger.columns()], rows)
    if cfg.diagnostics.norms:
        rows = [[tracker.entry(i, p)[c] for c in dg.NormTracker.columns()] for i in range(len(tracker))]
        io.write_csv(outdir / "norms.csv", dg.NormTracker.columns(), rows)
    if cfg.run.snapshot_every:
        for i, s in enumerate(res.snapshots):
            io.write_state(outdir / io.snapshot_name(i), s)

    window = res.snapshots
    d = cfg.diagnostics
    if d.evf_window:
        rep = dg.evf_identity(window[:d.evf_window], p)
        io.write_csv(outdir / "evf.csv", dg.EvfReport.columns() + ["min_combined_coefficient"],
                     [rep.row() + [float(np.min(rep.combined_coefficient_field))]])
    if d.renormalized or d.rho_b_pair:
        cols, vals = [], []
        if d.renormalized:
            cols.append("renormalized_residual")
            vals.append(dg.renormalized_residual(window, p))
        if d.rho_b_pair:
            cols += ["rho_b_pair_residual", "rho_b_pair_residual_without_eps_term"]
            vals += [dg.rho_b_pair_residual(window, p), dg.rho_b_pair_residual(window, p, False)]
        io.write_csv(outdir / "window.csv", cols, [vals])

    e_end = res.reports[-1].energy_after.total if res.reports and cfg.diagnostics.energy else float("nan")
    out.say(f"simulate ok steps={len(res.reports)} t={res.final.time:.17g} "
            f"mass={res.final.mass:.17g} energy={e_end:.17g} out={outdir}")
    return EXIT_OK


def cmd_mms(args, out):
    cfg = load_config(_config_path(args))
    m = cfg.mms
    steady = m.kind == "spatial"
    ms = default_solution(cfg.grid.dim, cfg.params, steady=steady, amplitude=m.amplitude,
                          omega=m.omega, decay=m.decay)
    rungs = [Rung(n, dt) for n, dt in m.rungs()]
    table = convergence_study(ms, cfg.params, rungs, m.t_end, dealias_fraction=cfg.grid.dealias_fraction)
    text = io.format_csv(ErrorRow.columns(), [r.row() for r in table.rows])
    _emit(text, args, "mms.csv", out)
    return EXIT_OK


def cmd_verify_derivation(args, out):
    seed = 0 if args.seed is None else args.seed
    rows = verify_trajectories(seed)
    text = io.format_csv(CheckRow.columns(), [r.row() for r in rows])
    _emit(text, args, "derivation.csv", out)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_RUNTIME


def _window_params(args, directory):
    path = args.config or Path(directory) / CONFIG_NAME
    cfg = load_config(path)
    return cfg, io.read_window(directory, cfg.grid.dealias_fraction)


def cmd_evf(args, out):
    cfg, window = _window_params(args, args.directory)
    rep = dg.evf_identity(window, cfg.params)
    text = io.format_csv(dg.EvfReport.columns() + ["min_combined_coefficient"],
                         [rep.row() + [float(np.min(rep.combined_coefficient_field))]])
    _emit(text, args, "evf.csv", out)
    return EXIT_OK


def cmd_energy_report(args, out):
    cfg, window = _window_params(args, args.directory)
    header, rows = _energy_rows(window, cfg.params)
    text = io.format_csv(header, rows)
    _emit(text, args, "energy_report.csv", out)
    return EXIT_OK


def _emit(text, args, name, out):
    if args.out:
        io.ensure_dir(args.out)
        (Path(args.out) / name).write_text(text, encoding="utf-8")
    if not args.quiet:
        sys.stdout.write(text)


# -- parser -------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (TOML)")
    common.add_argument("--out", help=f"output directory (default: config, then ${OUTPUT_ROOT_ENV})")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--snapshots-every", type=int, dest="snapshots_every",
                        help="write a snapshot every n steps")
    common.add_argument("--quiet", action="store_true", help="suppress normal output")

    parser = argparse.ArgumentParser(prog="stressdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in [
        ("simulate", cmd_simulate, "run a simulation with diagnostics"),
        ("mms", cmd_mms, "manufactured-solution convergence study"),
        ("validate", cmd_validate, "parse and validate a config"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("config_pos", nargs="?", metavar="config")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("verify-derivation", parents=[common], help="kinematic identity checks")
    sp.set_defaults(func=cmd_verify_derivation)
    for name, fn, helptext in [
        ("evf", cmd_evf, "effective-viscous-flux identity from stored snapshots"),
        ("energy-report", cmd_energy_report, "energy ledger of stored snapshots"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("directory")
        sp.set_defaults(func=fn)
    return parser


def _fail(exc, code):
    line = json.dumps({"error": type(exc).__name__, "exit_code": code, "message": str(exc)})
    print(line, file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    out = _Console(args.quiet)
    try:
        return args.func(args, out)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except (StressDiffError, ArithmeticError, RuntimeError) as exc:
        return _fail(exc, EXIT_RUNTIME)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except ValueError as exc:
        return _fail(exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
