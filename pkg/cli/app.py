"""
Command-Line Application
Entry point for the estimate and bridge commands
"""

import argparse
import logging
import sys

from core.errors import MomentsError, ConfigError, exit_code_for
from core.settings import get_settings
from cli.config import load_config
from cli.report import render
from cli.runner import run_estimate, run_bridge
from storage.database import init_database
from storage.run_store import RunStore

logger = logging.getLogger(__name__)


def build_parser():
    """Build the argument parser"""
    parser = argparse.ArgumentParser(
        prog='moments',
        description='Propagate the mean of f(x) through Taylor estimators and Monte Carlo',
    )
    subcommands = parser.add_subparsers(dest='command', required=True)

    estimate = subcommands.add_parser('estimate', help='Estimate E[f(x)] with the requested methods')
    estimate.add_argument('--seed', type=int, default=None, help='Override the job seed')
    estimate.add_argument('--mc-count', type=int, default=None, help='Override the Monte Carlo sample count')

    bridge = subcommands.add_parser('bridge', help='Run the convergence scan against a density analog')

    for command in (estimate, bridge):
        command.add_argument('--config', required=True, help='Path to the JSON job file')
        command.add_argument('--format', choices=('json', 'text'), default='text', dest='output_format')
        command.add_argument('--workers', type=int, default=None, help='Monte Carlo worker threads')
        command.add_argument('--store', default=None, help='Record the run in this SQLite database')

    return parser


def _store_report(report, db_path):
    """Record a finished report; failures only warn"""
    try:
        init_database(db_path)
        store = RunStore(db_path)
        if report['command'] == 'bridge':
            run_id = store.store_bridge(report)
        else:
            run_id = store.store_estimate(report)
        logger.info(f"Run {run_id} recorded in {db_path}")
    except Exception as e:
        logger.warning(f"Could not record run in {db_path}: {e}")


def run(args, settings):
    """
    Execute one parsed command

    Args:
        args: argparse namespace
        settings: Settings

    Returns:
        Report dictionary
    """
    config = load_config(args.config, args.command)
    workers = args.workers if args.workers is not None else settings.mc_workers
    if workers < 1:
        raise ConfigError('--workers must be at least 1')

    if args.command == 'estimate':
        config = config.with_overrides(seed=args.seed, mc_count=args.mc_count)
        return run_estimate(config, workers=workers)
    return run_bridge(config, workers=workers)


def main(argv=None):
    """
    Run the command line

    Args:
        argv: Argument list (defaults to sys.argv[1:])

    Returns:
        Process exit code
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = get_settings()
    logging.basicConfig(
        stream=sys.stderr,
        level=settings.log_level,
        format='%(levelname)s %(name)s: %(message)s',
    )

    try:
        report = run(args, settings)
    except MomentsError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"{e.category}: {e}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly")
        print(f"internal: {e}", file=sys.stderr)
        return exit_code_for(e)

    sys.stdout.write(render(report, args.output_format))

    db_path = args.store or settings.db_path
    if db_path:
        _store_report(report, db_path)
    return 0


if __name__ == '__main__':
    sys.exit(main())
