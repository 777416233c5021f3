from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

from blind_tdoa.bench import (
    Preset,
    compare_solvers,
    emit_report,
    preset_config,
    render_comparison,
    render_improvements,
    run_experiment,
)
from blind_tdoa.errors import InvalidArgument
from blind_tdoa.models import ExperimentConfig, SolverId
from blind_tdoa.settings import settings
from blind_tdoa.utils.config_text import build_model, load_config_file
from blind_tdoa.utils.serialization import write_json

from .common import HelpFormatter, add_report_formats, output_dir, report_formats

if TYPE_CHECKING:
    import argparse


log = logging.getLogger(__name__)


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """The sweep from ``--preset`` or ``--config``; an invalid one is a usage error."""

    overrides: dict[str, Any] = {}
    if args.trials is not None:
        overrides['z_trials'] = args.trials
    if args.solver is not None:
        overrides['solver'] = args.solver

    try:
        if args.preset:
            base = preset_config(Preset(args.preset), master_seed=0, extra_signals=args.signals or ())
            data = base.model_dump()
        else:
            data = load_config_file(args.config)
            if args.signals:
                listed = data.get('signals', ['white', 'pink'])
                data['signals'] = [*([listed] if isinstance(listed, str) else listed), *args.signals]
        return build_model(ExperimentConfig, {**data, **overrides, 'master_seed': args.seed})
    except InvalidArgument as exc:
        args.parser.error(f'invalid experiment config: {exc}')


def run(args: argparse.Namespace) -> None:
    out = output_dir(args)
    cfg = experiment_config(args)

    report = run_experiment(cfg, jobs=args.jobs)
    emit_report(report, report_formats(args.formats), out)
    if report.improvements:
        print(render_improvements(report))

    if args.compare:
        comparisons = compare_solvers(cfg, [SolverId(s) for s in args.compare], jobs=args.jobs)
        write_json([c.model_dump(mode='json') for c in comparisons], out / 'comparison.json')
        print(render_comparison(comparisons))


def setup(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        'benchmark',
        help='run a Monte-Carlo sweep',
        description='Run every (signal, s, N, trial) of a sweep and write its report directory.',
        formatter_class=HelpFormatter,
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--preset', choices=[str(p) for p in Preset], help='built-in sweep')
    source.add_argument('--config', type=Path, help='key = value file with ExperimentConfig fields')
    parser.add_argument('--seed', type=int, required=True, help='master seed of the sweep')
    parser.add_argument(
        '--signal', dest='signals', action='append', help='extra source spec such as file:<path>, repeatable'
    )
    parser.add_argument('--trials', type=int, help='override the trials per cell')
    parser.add_argument('--solver', choices=[str(s) for s in SolverId], help='override the solver or strategy')
    parser.add_argument(
        '--compare',
        nargs='+',
        choices=[str(s) for s in SolverId],
        help='also score these solvers on identical trials; the first is the baseline',
    )
    parser.add_argument('--jobs', type=int, default=settings.jobs, help='worker processes')
    parser.add_argument('--out', type=Path, help='output directory (default: $BLIND_TDOA_OUTPUT_DIR)')
    add_report_formats(parser)
    parser.set_defaults(handler=run, parser=parser)
