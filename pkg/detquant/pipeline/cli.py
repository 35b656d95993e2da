"""Command-line front end.

    detquant run <config> [--out DIR] [--threads N] [--verbose]
    detquant validate <config>
    detquant version

Exit codes: 0 success, 2 config error, 3 runtime error.
"""

import argparse
import json
import logging
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared import __version__
from shared.config import validate_config
from shared.errors import ConfigError
from shared.workers import THREADS_ENV
from pipeline.handler import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _print_errors(errors):
    print('Config errors:', file=sys.stderr)
    for error in errors:
        print(f'  {error}', file=sys.stderr)


def _cmd_run(args) -> int:
    try:
        result = run_scenario(args.config, out_dir=args.out, threads=args.threads)
    except ConfigError as e:
        _print_errors(e.errors)
        return EXIT_CONFIG
    if result['status'] != 'success':
        print(f"ERROR in stage {result.get('stage')}: {result['message']}", file=sys.stderr)
        return EXIT_RUNTIME
    print(result['message'])
    for filename in result['files']:
        print(f"  {os.path.join(result['out_dir'], filename)}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        report = validate_config(args.config)
    except ConfigError as e:
        _print_errors(e.errors)
        return EXIT_CONFIG
    print(f"ok: {report['scenario']}")
    for key, value in sorted(report['defaults_applied'].items()):
        print(f'  default {key} = {json.dumps(value)}')
    return EXIT_OK


def _cmd_version(args) -> int:
    print(__version__)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='detquant',
                                     description='Detection-oriented quantizer design and evaluation')
    parser.add_argument('--verbose', '-v', action='store_true', help='Log debug output')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run a scenario config')
    run.add_argument('config', help='Path to a scenario config file')
    run.add_argument('--out', default=None, help='Output directory (default: run.output_dir)')
    run.add_argument('--threads', type=int, default=None,
                     help=f'Worker cap (default: ${THREADS_ENV} or 1); never changes results')
    run.set_defaults(func=_cmd_run)

    validate = sub.add_parser('validate', help='Validate a scenario config without running it')
    validate.add_argument('config', help='Path to a scenario config file')
    validate.set_defaults(func=_cmd_validate)

    version = sub.add_parser('version', help='Print the library version')
    version.set_defaults(func=_cmd_version)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except Exception as e:
        print(f'ERROR: {e}', file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
