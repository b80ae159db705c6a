"""
Command-line interface for directional trend smoothing.
Fits, simulates, tabulates risks and plots from a config file and arguments.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from dirtrend.builder import TrendBuilder
from dirtrend.errors import NumericalError, TrendInputError
from dirtrend.logs import setup_trend_logger

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


def load_config(config_path: Path) -> dict:
    """Load configuration from YAML file."""
    with open(config_path, 'r', encoding='utf-8') as f:
        return yaml.safe_load(f) or {}


def _add_selection_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--family',
        action='append',
        dest='families',
        help='Candidate family token, repeatable: run3 | runw | runw:w=W0+W1 | '
             'pls:d=D[,c=C] | mpls:d=D1+D2[,c=C] | shrink:d=D (default: from config)'
    )
    parser.add_argument('--grid', type=int, help='Override grid points per parameter axis')
    parser.add_argument('--no-refine', action='store_true', help='Disable refinement inside the best grid cell')
    parser.add_argument('--max-workers', type=int, help='Override worker threads')
    parser.add_argument('--penalty-scale', dest='penalty_scale', type=float, help='Default penalty scale for PLS families')


def _add_simulation_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--trend', help='Built-in trend: wobble | bat | jumps')
    parser.add_argument('--trend-file', type=Path, help='YAML trend definition (label, f, g)')
    parser.add_argument('--p', type=int, help='Sequence length')
    parser.add_argument('--kappa', type=float, help='Fisher-Langevin precision')
    parser.add_argument('--seed', type=int, help='Master seed')


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '-c', '--config',
        type=Path,
        default=Path('config.yaml'),
        help='Path to configuration YAML file (default: config.yaml)'
    )
    common.add_argument('--degrees', action='store_true', help='CSV columns are time,lat,lon in degrees')
    common.add_argument('--out', type=Path, default=Path('output'), help='Output directory (default: output)')

    parser = argparse.ArgumentParser(
        description='Estimate directional trends on the sphere by risk-minimizing linear smoothers'
    )
    sub = parser.add_subparsers(dest='command', required=True)

    fit = sub.add_parser('fit', help='Select the best smoother and write report.json, fitted.csv, plot.svg', parents=[common])
    fit.add_argument('input', type=Path, help='Input CSV')
    _add_selection_arguments(fit)

    risks = sub.add_parser('risks', help='Write the estimated-risk table (report.json) only', parents=[common])
    risks.add_argument('input', type=Path, help='Input CSV')
    _add_selection_arguments(risks)

    simulate = sub.add_parser('simulate', help='Generate data.csv and truth.csv for a synthetic trend', parents=[common])
    _add_simulation_arguments(simulate)

    plot = sub.add_parser('plot', help='Lambert plot of CSV series (plot.svg)', parents=[common])
    plot.add_argument('input', type=Path, help='Input CSV')
    plot.add_argument('--fitted', type=Path, help='Fitted directions CSV')
    plot.add_argument('--truth', type=Path, help='True mean directions CSV')

    experiment = sub.add_parser('experiment', help='Repeated simulate-and-select runs (experiment.json)', parents=[common])
    _add_simulation_arguments(experiment)
    _add_selection_arguments(experiment)
    experiment.add_argument('--replications', type=int, help='Number of replications')

    return parser


def apply_overrides(config: dict, args: argparse.Namespace) -> dict:
    """Apply command-line overrides on top of the file configuration."""
    config.setdefault('selection', {})
    config.setdefault('simulation', {})
    if args.degrees:
        config['degrees'] = True
    if getattr(args, 'grid', None) is not None:
        config['selection']['grid_points_per_axis'] = args.grid
    if getattr(args, 'no_refine', False):
        config['selection']['refine'] = False
    if getattr(args, 'max_workers', None) is not None:
        config['selection']['max_workers'] = args.max_workers
    if getattr(args, 'penalty_scale', None) is not None:
        config['penalty_scale'] = args.penalty_scale
    for key in ('p', 'kappa', 'seed', 'replications'):
        value = getattr(args, key, None)
        if value is not None:
            config['simulation'][key] = value
    return config


def run(args: argparse.Namespace, config: dict) -> dict:
    builder = TrendBuilder(config)
    logs = builder.config['logging']
    setup_trend_logger(logs.get('log_dir', 'logs'), logs.get('level', 'INFO'))

    if args.command == 'fit':
        return builder.fit(args.input, args.out, args.families)
    if args.command == 'risks':
        return builder.risks(args.input, args.out, args.families)
    if args.command == 'simulate':
        return builder.simulate(args.out, args.trend, args.trend_file)
    if args.command == 'plot':
        return builder.plot(args.input, args.out, args.fitted, args.truth)
    return builder.experiment(args.out, args.trend, args.trend_file, args.families)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    for attr in ('input', 'fitted', 'truth', 'trend_file'):
        path = getattr(args, attr, None)
        if path is not None and not path.exists():
            print(f"Error: File not found: {path}", file=sys.stderr)
            return EXIT_INPUT_ERROR

    # Load config
    config = {}
    if args.config.exists():
        print(f"Loading configuration from {args.config}")
        try:
            config = load_config(args.config)
        except yaml.YAMLError as e:
            print(f"Error: invalid YAML in {args.config}: {e}", file=sys.stderr)
            return EXIT_INPUT_ERROR
    else:
        print(f"Warning: Config file not found: {args.config}")
        print("Using default configuration")
    config = apply_overrides(config, args)

    print("\n" + "=" * 60)
    print(f"DIRECTIONAL TREND - {args.command.upper()}")
    print("=" * 60)

    try:
        result = run(args, config)
    except (TrendInputError, FileNotFoundError, ValidationError, yaml.YAMLError) as e:
        print(f"\nError: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except NumericalError as e:
        print(f"\nError: {e}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR

    print("\n" + "=" * 60)
    print("SUCCESS")
    print("=" * 60)
    print("\nOutput files:")
    for name, path in result.items():
        print(f"  {name + ':':<11} {path}")
    print()
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
