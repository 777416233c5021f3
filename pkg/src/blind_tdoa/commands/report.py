from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from blind_tdoa.bench import emit_report, load_report, render_improvements

from .common import HelpFormatter, add_report_formats, report_formats

if TYPE_CHECKING:
    import argparse


def run(args: argparse.Namespace) -> None:
    report = load_report(args.input)
    out = args.out or (args.input if args.input.is_dir() else args.input.parent)
    emit_report(report, report_formats(args.formats), out)
    if report.improvements:
        print(render_improvements(report))


def setup(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        'report',
        help='re-render a saved benchmark report',
        description='Render a saved report.json again as csv, json or markdown.',
        formatter_class=HelpFormatter,
    )
    parser.add_argument('--in', dest='input', type=Path, required=True, help='report.json or its directory')
    parser.add_argument('--out', type=Path, help='output directory (default: next to the input)')
    add_report_formats(parser)
    parser.set_defaults(handler=run, parser=parser)
