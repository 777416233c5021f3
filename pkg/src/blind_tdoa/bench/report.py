from __future__ import annotations

__all__ = (
    'ReportFormat',
    'emit_report',
    'load_report',
    'render_cells_markdown',
    'render_comparison',
    'render_improvements',
    'render_tables_markdown',
)

import csv
import io
import logging
from enum import StrEnum
from pathlib import Path
from typing import TYPE_CHECKING

from pydantic import ValidationError

from blind_tdoa.errors import UnsupportedFormat
from blind_tdoa.models import METRICS, ExperimentReport, TrialRow
from blind_tdoa.utils.formats import TabularData, bar_glyph, format_number
from blind_tdoa.utils.serialization import read_json, write_json, write_text

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from blind_tdoa.models import CellResult, Improvement, MetricName, SolverComparison


log = logging.getLogger(__name__)

METRIC_TITLES: dict[MetricName, str] = {'a_ppm': 'A_PPM', 'a_pup': 'A_PUP'}


class ReportFormat(StrEnum):
    CSV = 'csv'
    JSON = 'json'
    MARKDOWN = 'markdown'


def _number(value: float | None) -> str:
    return '' if value is None else format(value, '.17g')


def _cells_csv(report: ExperimentReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['signal', 's', 'n_mics', 'metric', 'value', 'valid', 'n_trials', 'n_failed'])
    for cell in report.cells:
        for metric in METRICS:
            value = None if cell.metrics is None else getattr(cell.metrics, metric)
            writer.writerow([
                cell.signal,
                _number(cell.s),
                cell.n_mics,
                metric,
                _number(value),
                int(cell.valid),
                cell.n_trials,
                cell.n_failed,
            ])
    return buffer.getvalue()


def _csv_value(value: object) -> object:
    match value:
        case None:
            return ''
        case bool():
            return int(value)
        case float():
            return _number(value)
        case _:
            return value


def _trials_csv(trials: Sequence[TrialRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    columns = list(TrialRow.model_fields)
    writer.writerow(columns)
    for row in trials:
        values = row.model_dump()
        writer.writerow([_csv_value(values[c]) for c in columns])
    return buffer.getvalue()


def _cell_text(cell: CellResult | None, metric: MetricName, low: float, high: float) -> str:
    if cell is None:
        return ''
    if cell.metrics is None:
        return f'invalid ({cell.n_failed}/{cell.n_trials} failed)'
    value = getattr(cell.metrics, metric)
    return f'{bar_glyph(value, low, high)} {format_number(value)}'


def render_cells_markdown(report: ExperimentReport, metric: MetricName) -> str:
    """One grid per metric: a row per (signal, N), a column per s in ascending order.

    Bar glyphs are normalized per signal, so rows of one signal compare at a glance.
    """

    cfg = report.config
    table = TabularData()
    table.set_columns(['signal', 'N', *(f's={s:g}' for s in cfg.s_values)])
    for signal in cfg.signals:
        values = [
            getattr(c.metrics, metric) for c in report.cells if c.signal == signal and c.metrics is not None
        ]
        low, high = (min(values), max(values)) if values else (0.0, 0.0)
        for n_mics in cfg.n_mics_values:
            table.add_row([
                signal,
                n_mics,
                *(_cell_text(report.cell(signal, s, n_mics), metric, low, high) for s in cfg.s_values),
            ])
    return table.render_markdown()


def _improvement_rows(improvements: Sequence[Improvement]) -> TabularData:
    table = TabularData()
    table.set_columns(['signal', 'metric', 's', 'delta_avg', 'Delta^O', 'note'])
    for item in improvements:
        oracle = '' if item.delta_oracle is None else f'{item.delta_oracle:+.1f}% (N={item.oracle_n})'
        avg = '' if item.delta_avg is None else f'{item.delta_avg:+.4f}'
        table.add_row([item.signal, METRIC_TITLES[item.metric], f'{item.reference_s:g}', avg, oracle, item.note or ''])
    return table


def render_improvements(report: ExperimentReport, *, markdown: bool = False) -> str:
    """Improvement of N > 2 over the N = 2 baseline at the reference noise ratio."""

    table = _improvement_rows(report.improvements)
    return table.render_markdown() if markdown else table.render()


def render_tables_markdown(report: ExperimentReport) -> str:
    cfg = report.config
    parts = [
        f'# Benchmark: {cfg.solver}',
        '',
        f'{cfg.z_trials} trials per cell, master seed {cfg.master_seed}, version {report.version}.',
    ]
    for metric in METRICS:
        parts += ['', f'## {METRIC_TITLES[metric]}', '', render_cells_markdown(report, metric)]
    if report.improvements:
        parts += ['', '## Improvement over N=2', '', render_improvements(report, markdown=True)]
    return '\n'.join(parts) + '\n'


def render_comparison(comparisons: Sequence[SolverComparison]) -> str:
    parts: list[str] = []
    for comparison in comparisons:
        table = TabularData()
        table.set_columns(['solver', 's', 'N', 'A_PPM', 'A_PUP', 'failed'])
        for row in comparison.rows:
            metrics = row.metrics
            table.add_row([
                row.solver,
                f'{row.s:g}',
                row.n_mics,
                format_number(None if metrics is None else metrics.a_ppm),
                format_number(None if metrics is None else metrics.a_pup),
                row.n_failed,
            ])
        parts += [f'{comparison.signal}:', table.render()]
        parts.extend(
            f'  {pair}: no worse on both metrics in {share:.0%} of trials'
            for pair, share in comparison.win_fractions.items()
        )
    return '\n'.join(parts)


def emit_report(
    report: ExperimentReport,
    formats: Iterable[ReportFormat],
    directory: str | Path,
) -> list[Path]:
    """Write the requested renderings into ``directory`` and return the written paths.

    ``csv`` writes ``cells.csv`` (one row per cell and metric) and
    ``raw_trials.csv``; ``json`` writes ``report.json``; ``markdown``
    writes ``tables.md``.
    """

    directory = Path(directory)
    written: list[Path] = []
    for fmt in dict.fromkeys(formats):
        match fmt:
            case ReportFormat.CSV:
                write_text(_cells_csv(report), directory / 'cells.csv')
                write_text(_trials_csv(report.trials), directory / 'raw_trials.csv')
                written += [directory / 'cells.csv', directory / 'raw_trials.csv']
            case ReportFormat.JSON:
                write_json(report.model_dump(mode='json'), directory / 'report.json')
                written.append(directory / 'report.json')
            case ReportFormat.MARKDOWN:
                write_text(render_tables_markdown(report), directory / 'tables.md')
                written.append(directory / 'tables.md')

    log.info(f'Wrote {", ".join(p.name for p in written)} to {directory}')
    return written


def load_report(path: str | Path) -> ExperimentReport:
    path = Path(path)
    if path.is_dir():
        path /= 'report.json'
    try:
        return ExperimentReport.model_validate(read_json(path))
    except ValidationError as exc:
        raise UnsupportedFormat(f'{path}: not a benchmark report ({exc.error_count()} schema errors)') from None
