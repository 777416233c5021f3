from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

from blind_tdoa.constants import DEFAULT_MAX_PEAKS, DEFAULT_REL_FLOOR, MATCH_THRESHOLD
from blind_tdoa.peaks_metrics import compute_metrics, score_estimate
from blind_tdoa.utils.formats import TabularData
from blind_tdoa.utils.serialization import read_airs, write_match_rows_csv

from .common import HelpFormatter

if TYPE_CHECKING:
    import argparse


log = logging.getLogger(__name__)


def run(args: argparse.Namespace) -> None:
    truth = read_airs(args.truth)
    estimate = read_airs(args.estimate)
    reports = score_estimate(
        truth,
        estimate,
        threshold=args.threshold,
        max_peaks=args.max_peaks,
        rel_floor=args.rel_floor,
    )
    metrics = compute_metrics([reports])

    table = TabularData()
    table.set_columns(['channel', 'truth', 'estimate', 'offset'])
    for channel, report in enumerate(reports):
        table.add_rows((channel, *pair) for pair in report.matched_pairs)
    print(table.render())

    unmatched = sum(r.unmatched_truth_count for r in reports)
    print(f'A_PPM {metrics.a_ppm:.4f}  A_PUP {metrics.a_pup:.4f}  ({unmatched} true peaks unmatched)')

    if args.csv:
        write_match_rows_csv(reports, args.csv)
        log.info(f'Wrote match rows to {args.csv}')


def setup(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        'metrics',
        help='score estimated AIRs against ground truth',
        description='Match the peaks of an estimated AIR file to a ground-truth AIR file.',
        formatter_class=HelpFormatter,
    )
    parser.add_argument('--truth', type=Path, required=True, help='ground-truth AIR file (.bin or .csv)')
    parser.add_argument('--estimate', type=Path, required=True, help='estimated AIR file (.bin or .csv)')
    parser.add_argument('--threshold', type=int, default=MATCH_THRESHOLD, help='largest matchable offset')
    parser.add_argument('--max-peaks', type=int, default=DEFAULT_MAX_PEAKS, help='peaks kept per channel')
    parser.add_argument('--rel-floor', type=float, default=DEFAULT_REL_FLOOR, help='peak floor relative to the maximum')
    parser.add_argument('--csv', type=Path, help='also write the match rows to this CSV file')
    parser.set_defaults(handler=run, parser=parser)
