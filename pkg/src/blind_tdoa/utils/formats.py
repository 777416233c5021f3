from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    import numpy as np
    from numpy.typing import NDArray


BAR_GLYPHS = '▁▂▃▄▅▆▇█'


class plural:  # noqa: N801
    def __init__(self, value: int):
        self.value: int = value

    def __format__(self, format_spec: str) -> str:
        v = self.value
        singular, _sep, plural = format_spec.partition('|')
        plural = plural or f'{singular}s'
        if abs(v) != 1:
            return f'{v} {plural}'
        return f'{v} {singular}'


def human_join(seq: Sequence[str], delim: str = ', ', final: str = 'or') -> str:
    size = len(seq)
    if size == 0:
        return ''

    if size == 1:
        return seq[0]

    if size == 2:
        return f'{seq[0]} {final} {seq[1]}'

    return delim.join(seq[:-1]) + f' {final} {seq[-1]}'


def format_number(value: float | None, digits: int = 4) -> str:
    """Render a metric value; ``None`` and NaN print as ``n/a``."""

    if value is None or math.isnan(value):
        return 'n/a'
    return f'{value:.{digits}f}'


def bar_glyph(value: float | None, low: float, high: float) -> str:
    """Map ``value`` in ``[low, high]`` onto one of eight bar heights."""

    if value is None or math.isnan(value):
        return ' '
    if high <= low:
        return BAR_GLYPHS[0]
    frac = min(max((value - low) / (high - low), 0.0), 1.0)
    return BAR_GLYPHS[round(frac * (len(BAR_GLYPHS) - 1))]


class TabularData:
    def __init__(self):
        self._widths: list[int] = []
        self._columns: list[str] = []
        self._rows: list[list[str]] = []

    def set_columns(self, columns: list[str]):
        self._columns = columns
        self._widths = [len(c) + 2 for c in columns]

    def add_row(self, row: Iterable[Any]) -> None:
        rows = [str(r) for r in row]
        self._rows.append(rows)
        for index, element in enumerate(rows):
            width = len(element) + 2
            self._widths[index] = max(self._widths[index], width)

    def add_rows(self, rows: Iterable[Iterable[Any]]) -> None:
        for row in rows:
            self.add_row(row)

    def render(self) -> str:
        """Renders a table in rST format.

        Example:

        +-----+-----+-----+
        |     | m0  | m1  |
        +-----+-----+-----+
        | m0  |  0  | 40  |
        | m1  | -40 |  0  |
        +-----+-----+-----+
        """

        sep = '+'.join('-' * w for w in self._widths)
        sep = f'+{sep}+'

        to_draw = [sep]

        def get_entry(d: list[str]) -> str:
            elem = '|'.join(f'{e:^{self._widths[i]}}' for i, e in enumerate(d))
            return f'|{elem}|'

        to_draw.extend((get_entry(self._columns), sep))

        to_draw.extend(get_entry(row) for row in self._rows)

        to_draw.append(sep)
        return '\n'.join(to_draw)

    def render_markdown(self) -> str:
        """Renders the same table as a GitHub pipe table."""

        def get_entry(d: list[str]) -> str:
            elem = ' | '.join(f'{e:<{self._widths[i] - 2}}' for i, e in enumerate(d))
            return f'| {elem} |'

        rule = '|' + '|'.join('-' * w for w in self._widths) + '|'
        to_draw = [get_entry(self._columns), rule]
        to_draw.extend(get_entry(row) for row in self._rows)
        return '\n'.join(to_draw)


def format_delay_matrix(matrix: NDArray[np.floating[Any] | np.integer[Any]]) -> str:
    """Render a pairwise TDOA matrix (samples) as an rST grid."""

    n = matrix.shape[0]
    table = TabularData()
    table.set_columns(['', *(f'm{j}' for j in range(n))])
    for i in range(n):
        cells = [
            'nan' if math.isnan(float(value)) else f'{float(value):g}'
            for value in matrix[i]
        ]
        table.add_row([f'm{i}', *cells])
    return table.render()


def format_constraint_report(report: dict[str, float]) -> str:
    table = TabularData()
    table.set_columns(['constraint', 'max violation'])
    table.add_rows((name, f'{value:.3e}') for name, value in report.items())
    return table.render()
