#!/usr/bin/env python3

import argparse
import csv
import logging
import os
import sys

# Add the project root to the path so we can use absolute imports
sys.path.insert(0, os.path.abspath(os.path.dirname(os.path.dirname(__file__))))

from src.calibration.fit import MIN_COUNT, SIGMA_FLOOR, fit_drift_vol
from src.calibration.series import SeriesData
from src.engines.pipeline import build_reference_model, run_pipeline
from src.errors import ConfigError, EntropicStressError
from src.model.process import TiltFields
from src.pde.fields import FieldTX
from src.reporting.plots import save_figures
from src.reporting.report_generator import export_report
from src.simulation.config import MODELS, RunConfig
from src.simulation.simulator import PathSimulator
from src.simulation.tilted_simulator import TiltedPathSimulator

OVERRIDES = {
    'engine': 'engine',
    'tol': 'tol',
    'seed': 'seed',
    'paths': 'n_paths',
    'steps': 'n_steps',
    'x0': 'x0',
    'horizon': 'horizon',
    'out': 'out_dir',
}


def apply_model_arg(config, model):
    """
    Point the configuration at a built-in model name or a fitted-model CSV.

    Args:
        config (RunConfig): Configuration to update
        model (str): "brownian", "ou" or a path to a fitted-model CSV
    """
    if model is None:
        return config
    if model in MODELS and model != "fitted":
        config.model = model
    else:
        config.model = "fitted"
        config.model_file = model
        config.series_file = None
    return config


def build_config(args):
    """RunConfig from an optional JSON file with command-line overrides applied."""
    config = RunConfig.from_file(args.config) if getattr(args, 'config', None) else RunConfig()
    apply_model_arg(config, getattr(args, 'model', None))
    for arg_name, attribute in OVERRIDES.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            setattr(config, attribute, value)
    if getattr(args, 'constraint', None):
        config.constraints = list(args.constraint)
    return config.validate()


def cmd_fit(args):
    series = SeriesData.from_csv(args.csv)
    fitted = fit_drift_vol(series, args.bins, min_count=args.min_count, sigma_floor=args.sigma_floor)
    print(fitted)
    path = fitted.to_csv(args.out)
    print(f"\nFitted model saved to {path}")
    return 0


def cmd_solve(args):
    config = build_config(args)
    print(config)
    print("\nStarting stress run...\n")
    report = run_pipeline(config)
    print(report)
    digests = export_report(report, config.out_dir)
    print(f"\n{len(digests)} report artifacts written to '{config.out_dir}'")
    return report.exit_code


def cmd_simulate(args):
    config = build_config(args)
    spec, _ = build_reference_model(config)
    if args.tilt:
        field = FieldTX.from_csv(args.tilt)
        if field.label != "lambda":
            raise ConfigError(f"{args.tilt} holds a '{field.label}' field, not a drift control")
        tilt = TiltFields(field)
        simulator = TiltedPathSimulator(spec, tilt, config.n_steps, config.n_paths, config.seed,
                                        block_size=config.block_size)
    else:
        simulator = PathSimulator(spec, config.n_steps, config.n_paths, config.seed,
                                  block_size=config.block_size)
    ensemble = simulator.run_simulation()
    print(simulator.get_results_summary())

    os.makedirs(config.out_dir, exist_ok=True)
    filepath = os.path.join(config.out_dir, "terminal_states.csv")
    path_ids = ensemble.seed_manifest.path_ids
    with open(filepath, 'w', newline='') as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        header = ['block', 'row'] + [f"x{i}" for i in range(ensemble.dim)]
        if ensemble.log_density is not None:
            header.append('log_density')
        writer.writerow(header)
        for index in range(ensemble.n_paths):
            row = [int(path_ids[index, 0]), int(path_ids[index, 1])]
            row += [format(value, '.17g') for value in ensemble.terminal[index]]
            if ensemble.log_density is not None:
                row.append(format(ensemble.log_density[index], '.17g'))
            writer.writerow(row)
    print(f"\nTerminal states saved to {filepath}")
    return 0


def cmd_report(args):
    config = build_config(args)
    print(config)
    report = run_pipeline(config)
    print("\n" + str(report))
    digests = export_report(report, config.out_dir)
    if args.plots:
        save_figures(report, os.path.join(config.out_dir, "figures"))
    print(f"\nReport generated in '{config.out_dir}':")
    for name, digest in sorted(digests.items()):
        print(f"  {name}  {digest[:16]}")
    return report.exit_code


def add_run_arguments(parser):
    parser.add_argument('--config', type=str, help='JSON run configuration')
    parser.add_argument('--model', type=str,
                        help='Reference model: brownian, ou or a fitted-model CSV')
    parser.add_argument('--x0', type=float, help='Initial state (normalised units)')
    parser.add_argument('--horizon', type=float, help='Time horizon')
    parser.add_argument('--paths', type=int, help='Number of simulated paths')
    parser.add_argument('--steps', type=int, help='Euler steps per path')
    parser.add_argument('--seed', type=int, help='Base seed')
    parser.add_argument('--out', type=str, help='Output directory')


def build_parser():
    parser = argparse.ArgumentParser(description="Entropic stress testing of stochastic models")
    parser.add_argument('--verbose', '-v', action='store_true', default=False,
                        help='Log progress and solver diagnostics')
    subparsers = parser.add_subparsers(dest='command', required=True)

    fit = subparsers.add_parser('fit', help='Fit drift and volatility to a price series')
    fit.add_argument('csv', type=str, help='CSV file with columns timestamp,value')
    fit.add_argument('--bins', type=int, default=40, help='Number of bins (default: 40)')
    fit.add_argument('--out', type=str, default='model.csv', help='Output model CSV (default: model.csv)')
    fit.add_argument('--min-count', type=int, default=MIN_COUNT,
                     help=f'Minimum increments per bin (default: {MIN_COUNT})')
    fit.add_argument('--sigma-floor', type=float, default=SIGMA_FLOOR,
                     help=f'Lower bound on the volatility (default: {SIGMA_FLOOR})')
    fit.set_defaults(handler=cmd_fit)

    solve = subparsers.add_parser('solve', help='Find the optimal stressed measure')
    add_run_arguments(solve)
    solve.add_argument('--engine', choices=['mc', 'pde'], help='Solution engine')
    solve.add_argument('--constraint', action='append',
                       help='Constraint such as "var(level=0.9,shift=+10%%)"; repeatable')
    solve.add_argument('--tol', type=float, help='Solver tolerance')
    solve.set_defaults(handler=cmd_solve)

    simulate = subparsers.add_parser('simulate', help='Simulate paths, optionally under a grid tilt')
    add_run_arguments(simulate)
    simulate.add_argument('--tilt', type=str, help='Drift-control CSV exported by solve')
    simulate.set_defaults(handler=cmd_simulate)

    report = subparsers.add_parser('report', help='Run a configuration and write all report artifacts')
    add_run_arguments(report)
    report.add_argument('--plots', action='store_true', default=False, help='Also save PNG figures')
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except EntropicStressError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
