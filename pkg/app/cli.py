"""
Command-line surface.

    run CONFIG        one trial from a WorldConfig file
    study NAME|FILE   a preset study at any scale factor or a StudySpec file
    validate CONFIG   schema check only
    trace CONFIG      one trial plus a JSON-lines message trace

Exit codes: 0 ok, 1 trial failure, 2 usage or configuration error.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from app import create_app
from app.errors import ConfigurationError, TrialError
from app.schemas import load_study_spec
from app.services.metrics import eq_percent, export
from app.services.modalities import TraceWriter
from app.services.study_runner import STUDY_MODALITIES, preset_study
from app.utils import read_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TRIAL = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ikt',
        description='Behavior-tree knowledge transfer in a search-and-rescue robot swarm',
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('--env', default=None, help='config profile: development, production or testing')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run a single trial')
    run.add_argument('config', metavar='CONFIG', help='WorldConfig JSON file')
    run.add_argument('--seed', type=int, default=None)
    run.add_argument('--out', metavar='DIR', default=None)
    run.add_argument('--trace', action='store_true', help='also write the message trace')

    trace = sub.add_parser('trace', help='run a single trial with a JSON-lines message trace')
    trace.add_argument('config', metavar='CONFIG')
    trace.add_argument('--seed', type=int, default=None)
    trace.add_argument('--out', metavar='DIR', default=None)

    study = sub.add_parser('study', help='run a study sweep')
    study.add_argument('study', metavar='STUDY',
                       help=f"one of {', '.join(STUDY_MODALITIES)} or a StudySpec JSON file")
    study.add_argument('--scale', type=float, default=0.25, metavar='FACTOR',
                       help='any positive factor of the full setup; 0.25 is desk scale, 1.0 full')
    study.add_argument('--trials', type=int, default=None, metavar='N')
    study.add_argument('--jobs', type=int, default=None, metavar='N')
    study.add_argument('--seed', type=int, default=None)
    study.add_argument('--out', metavar='DIR', default=None)

    validate = sub.add_parser('validate', help='check a WorldConfig file against the schema')
    validate.add_argument('config', metavar='CONFIG')
    return parser


def _run(app, args, with_trace: bool) -> int:
    cfg = app.load_world_config(args.config, seed=args.seed)
    out_dir = os.path.join(args.out or app.config.OUTPUT_DIR, 'run')
    stem = os.path.join(out_dir, f'seed-{cfg.seed}')

    if with_trace:
        with TraceWriter(os.path.join(out_dir, app.config.SIM_TRACE_FILE)) as writer:
            ledger = app.run_trial(cfg, trace=writer)
    else:
        ledger = app.run_trial(cfg)

    export(ledger, 'csv', f'{stem}.csv')
    export(ledger, 'json', f'{stem}.json')
    print(f"collected {ledger.collected}/{cfg.total_targets} by iteration {ledger.stop_iteration}; "
          f"queries {ledger.queries}, EQ {eq_percent(ledger):.1%}, updates {ledger.counters()}")
    print(f"wrote {stem}.csv")
    return EXIT_OK


def _study(app, args) -> int:
    if args.study.endswith('.json') or os.path.isfile(args.study):
        try:
            spec = load_study_spec(read_json(args.study))
        except (OSError, ValueError) as e:
            raise ConfigurationError(f'cannot read study spec: {e}', path=args.study) from e
        updates = {}
        if args.trials:
            updates['trials'] = args.trials
        if args.seed is not None:
            updates['base'] = spec.base.model_copy(update={'seed': args.seed})
        spec = spec.model_copy(update=updates)
    else:
        seed = args.seed if args.seed is not None else app.config.DEFAULT_SEED
        spec = preset_study(args.study, args.scale, args.trials, seed)

    summary = app.run_study(spec, args.out, args.jobs)
    for row in summary['aggregate']:
        print(f"{row['modality']:>4} {row['sweep']:>12}  stop {row['stop_iteration_mean']:.0f}  "
              f"queries {row['queries_mean']:.1f}  updates {row['upd_total_mean']:.1f}")
    return EXIT_OK


def _validate(app, args) -> int:
    cfg = app.load_world_config(args.config)
    print(f"{args.config}: ok ({cfg.robot_count()} robots, {cfg.total_targets} targets)")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    app = create_app(args.env)

    try:
        if args.command == 'run':
            return _run(app, args, args.trace)
        if args.command == 'trace':
            return _run(app, args, True)
        if args.command == 'study':
            return _study(app, args)
        return _validate(app, args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TrialError as e:
        logger.error(f"Trial failed: {e}")
        print(f"trial failed: {e}", file=sys.stderr)
        return EXIT_TRIAL
