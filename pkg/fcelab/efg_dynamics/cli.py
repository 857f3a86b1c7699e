#!/usr/bin/env python3
"""
Command-line interface for fcelab.

Subcommands:
    run       learn on a game, audit the trace, write trace/CSV/summary
    resume    continue a saved trace from its checkpoint
    verify    epsilons of a signal file and the nesting-chain check
    gapcheck  decomposition inequalities on a saved trace

Exit codes: 0 success, 1 threshold missed, 2 invalid input, 3 cap exceeded.
"""

import argparse
import asyncio
import json
import os
import sys
from typing import Any, Dict, List, Optional

from . import config
from .app import ExperimentApp
from .exceptions import ConfigError
from .logger import get_logger
from .models import Procedure, RunConfig

logger = get_logger(__name__)


def resolve_seed(flag: Optional[int], environ: Optional[Dict[str, str]] = None) -> int:
    """--seed, else FCELAB_SEED, else 0."""
    if flag is not None:
        return flag
    value = (os.environ if environ is None else environ).get(config.SEED_ENV_VAR)
    if value is None or value == "":
        return 0
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{config.SEED_ENV_VAR}={value!r} is not an integer seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcelab", description="Uncoupled correlated-equilibrium learning "
                                                                "for extensive-form games.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a learner, audit the trace and write artifacts")
    run.add_argument('--game', required=True, help='Game file path or builtin:<name>')
    run.add_argument('--proc', choices=config.PROCEDURES, default='fce', help='Learning procedure (default: fce)')
    run.add_argument('--steps', type=int, default=100_000, help='Number of timesteps T')
    run.add_argument('--seed', type=int, default=None, help=f'Seed (default: ${config.SEED_ENV_VAR} or 0)')
    run.add_argument('--mu', type=float, default=None, help='Override the per-infoset mu')
    run.add_argument('--audit-every', type=int, default=None,
                     help='Audit every k steps; 0 for the final step only (default: powers of two)')
    run.add_argument('--checkpoint-every', type=int, default=0, help='Rewrite the trace every k steps')
    run.add_argument('--out', default=config.DEFAULT_OUTPUT_DIR, help='Output directory')
    run.add_argument('--jobs', type=int, default=1, help='Run this many consecutive seeds in parallel')
    run.add_argument('--profile-cap', type=int, default=config.PROFILE_CAP, help='Sample cap for the verifiers')
    run.add_argument('--threshold', type=float, default=None,
                     help="Exit 1 when the procedure's target epsilon exceeds this value")
    run.add_argument('--progress', action='store_true', help='Show a progress bar')
    run.add_argument('--json', action='store_true', help='Output results in JSON format')

    res = sub.add_parser("resume", help="Continue a saved trace from its checkpoint")
    res.add_argument('--game', required=True)
    res.add_argument('--trace', required=True)
    res.add_argument('--steps', type=int, required=True, help='Extra timesteps')
    res.add_argument('--out', default=None, help='Directory for the extended trace (default: next to the input)')
    res.add_argument('--json', action='store_true')

    verify = sub.add_parser("verify", help="Report the equilibrium epsilons of a signal file")
    verify.add_argument('--game', required=True)
    verify.add_argument('--signal', required=True, help='Lines of: weight <w> profile <infoset>=<action> ...')
    verify.add_argument('--threshold', type=float, default=config.TOLERANCE)
    verify.add_argument('--profile-cap', type=int, default=config.PROFILE_CAP)
    verify.add_argument('--json', action='store_true')

    gap = sub.add_parser("gapcheck", help="Check the regret decomposition inequalities on a trace")
    gap.add_argument('--game', required=True)
    gap.add_argument('--trace', required=True)
    gap.add_argument('--tolerance', type=float, default=config.TOLERANCE)
    gap.add_argument('--profile-cap', type=int, default=config.PROFILE_CAP)
    gap.add_argument('--json', action='store_true')
    return parser


def print_result(result: Dict[str, Any], as_json: bool) -> None:
    if as_json:
        print(json.dumps(result, indent=2, default=str))
        return
    if result['success']:
        print("OK")
    else:
        print(f"FAILED (exit {result['exit_code']}): {result['error']}", file=sys.stderr)
    for key, value in result['summary'].items():
        print(f"  {key}: {value}")
    for key, value in result['artifacts'].items():
        print(f"  {key} -> {value}")
    for key, value in result['debug_info'].items():
        print(f"  {key}: {value}", file=sys.stderr)


async def dispatch(args: argparse.Namespace) -> Dict[str, Any]:
    if args.command == "run":
        app = ExperimentApp(args.out)
        try:
            run_config = RunConfig(
                game=args.game, procedure=Procedure(args.proc), steps=args.steps,
                seed=resolve_seed(args.seed), mu=args.mu, checkpoint_every=args.checkpoint_every,
                output_dir=args.out, audit_every=args.audit_every, profile_cap=args.profile_cap,
                jobs=args.jobs, progress=args.progress, threshold=args.threshold,
            )
        except ConfigError as e:
            return ExperimentApp._fail(ExperimentApp._new_result(), e)
        if run_config.jobs > 1:
            return await app.sweep(run_config)
        return await app.run(run_config)
    if args.command == "resume":
        app = ExperimentApp(args.out or os.path.dirname(os.path.abspath(args.trace)))
        return await app.resume(args.game, args.trace, args.steps, args.out)
    if args.command == "verify":
        return await ExperimentApp().verify(args.game, args.signal, args.threshold, args.profile_cap)
    return await ExperimentApp().gapcheck(args.game, args.trace, args.tolerance, args.profile_cap)


def main(argv: Optional[List[str]] = None) -> None:
    """Main CLI entry point"""
    args = build_parser().parse_args(argv)
    try:
        result = asyncio.run(dispatch(args))
    except Exception as e:
        logger.critical(f"An unexpected error occurred in main: {e}", exc_info=True)
        print(f"\nCRITICAL ERROR: {e}", file=sys.stderr)
        sys.exit(1)
    print_result(result, args.json)
    sys.exit(result['exit_code'])


if __name__ == "__main__":
    main()
