"""Command-line front door: run, sweep, verify, estimate-c0"""

import argparse
import logging
import sys

import config
from models.exceptions import DarcyDAError
from models.interpolants import estimate_c0, estimate_c1_c2, InterpolantKind
from models.property_checks import verify
from models.twin_experiment import run_twin_experiment, sweep
from utils.config_parser import load_config
from utils.file_handler import FileHandler

logger = logging.getLogger("darcy_da")

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_BAD_CONFIG = 2


def parse_values(text):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="darcy-da", description=config.APP_DESCRIPTION)
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="one twin experiment")
    run.add_argument("config")
    run.add_argument("--output", help="CSV path (overrides output_csv)")
    run.add_argument("--plot", help="write a semilog error plot (PNG)")

    sweep_cmd = commands.add_parser("sweep", help="twin experiments over one parameter")
    sweep_cmd.add_argument("config")
    sweep_cmd.add_argument("--axis", required=True, choices=config.SWEEP_AXES)
    sweep_cmd.add_argument("--values", required=True, type=parse_values)
    sweep_cmd.add_argument("--output", help="CSV path for the sweep table")
    sweep_cmd.add_argument("--plot", help="write a PNG of rate and final error")

    verify_cmd = commands.add_parser("verify", help="property checks on the configured grid")
    verify_cmd.add_argument("config")
    verify_cmd.add_argument("--trials", type=int, default=config.DEFAULT_C0_TRIALS)

    c0_cmd = commands.add_parser("estimate-c0", help="measure the interpolant constant")
    c0_cmd.add_argument("config")
    c0_cmd.add_argument("--trials", type=int, default=None)
    c0_cmd.add_argument("--seed", type=int, default=None)
    return parser


def command_run(args):
    cfg = load_config(args.config)
    if args.output:
        cfg = cfg.replace(output_csv=args.output)
    series = run_twin_experiment(cfg)
    meta = series.metadata
    print(f"config hash   {meta['config_hash'][:16]}")
    print(f"c0            {meta['c0']:.6g}")
    print(f"mu condition  {'ok' if meta['mu_condition'] else 'NOT met'} (margin {meta['mu_margin']:.6g})")
    if meta["c_universal"] != config.DEFAULT_C_UNIVERSAL:
        print(f"              evaluated with c = {meta['c_universal']:g}, not c = {config.DEFAULT_C_UNIVERSAL:g}")
    print(f"h condition   {'ok' if meta['h_condition'] else 'NOT met'}")
    print(f"final ||xi||  {series.final_error:.6e}")
    print(f"fitted rate   {series.fitted_rate:.6g}")
    if args.plot:
        from utils.visualization import VisualizationHelper
        VisualizationHelper().save_error_plot(series, args.plot)
    return EXIT_RUN_FAILED if series.failed else EXIT_OK


def command_sweep(args):
    cfg = load_config(args.config)
    table = sweep(cfg, args.axis, args.values)
    print(table.to_string(index=False))
    if args.output:
        FileHandler().write_table(table, args.output)
    if args.plot:
        from utils.visualization import VisualizationHelper
        VisualizationHelper().save_sweep_plot(table, args.plot)
    return EXIT_RUN_FAILED if table["failed"].any() else EXIT_OK


def command_verify(args):
    cfg = load_config(args.config)
    table = verify(cfg, trials=args.trials)
    print(table.to_string(index=False))
    return EXIT_OK if table["passed"].all() else EXIT_RUN_FAILED


def command_estimate_c0(args):
    cfg = load_config(args.config)
    interpolant = cfg.make_interpolant()
    trials = args.trials or cfg.c0_trials
    seed = cfg.field_seed if args.seed is None else args.seed
    if interpolant.kind is InterpolantKind.NODAL:
        c1, c2 = estimate_c1_c2(interpolant, trials, seed)
        print(f"{interpolant.kind.value} h={interpolant.h}: c1 = c2 = {c1:.6g}")
    else:
        c0 = estimate_c0(interpolant, trials, seed)
        print(f"{interpolant.kind.value} h={interpolant.h}: c0 = {c0:.6g}")
        print(f"mu c0^2 h^2 = {cfg.mu * c0 ** 2 * cfg.h ** 2:.6g}")
    return EXIT_OK


COMMANDS = {
    "run": command_run,
    "sweep": command_sweep,
    "verify": command_verify,
    "estimate-c0": command_estimate_c0,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DarcyDAError as exc:
        logger.error("%s", exc)
        return EXIT_BAD_CONFIG
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
