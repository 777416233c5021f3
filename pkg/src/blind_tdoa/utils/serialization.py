from __future__ import annotations

__all__ = (
    'read_airs',
    'read_airs_binary',
    'read_airs_csv',
    'read_json',
    'read_observations',
    'read_observations_binary',
    'read_observations_csv',
    'write_airs_binary',
    'write_airs_csv',
    'write_delay_matrix_csv',
    'write_json',
    'write_match_rows_csv',
    'write_observations_binary',
    'write_observations_csv',
    'write_solver_result',
    'write_text',
)

import csv
import io
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any, Final

import numpy as np
import orjson

from blind_tdoa.errors import NotFoundError, ReportIOError, UnsupportedFormat
from blind_tdoa.models import AirSet, ObservationSet

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from blind_tdoa.models import MatchReport, SolverResult


FORMAT_VERSION: Final = 1
AIRS_MAGIC: Final = b'AIRS'
OBSERVATIONS_MAGIC: Final = b'OBSV'

# 16 bytes, little-endian, no padding
HEADER_DTYPE: Final = np.dtype([
    ('magic', 'S4'),
    ('version', '<u2'),
    ('n', '<u2'),
    ('length', '<u4'),
    ('fs', '<u4'),
])

JSON_OPTIONS: Final = orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as exc:
        raise ReportIOError(f'cannot write {path}: {exc.strerror or exc}') from exc


def _write_text(path: Path, text: str) -> None:
    _write_bytes(path, text.encode('utf-8'))


def write_text(text: str, path: str | Path) -> None:
    _write_text(Path(path), text)


def _read_bytes(path: Path) -> bytes:
    if not path.is_file():
        raise NotFoundError(f'{path} does not exist')
    return path.read_bytes()


def _pack(magic: bytes, data: NDArray[np.float64], fs: int, trailer: Sequence[float] = ()) -> bytes:
    n, length = data.shape
    header = np.array([(magic, FORMAT_VERSION, n, length, fs)], dtype=HEADER_DTYPE)
    body = np.ascontiguousarray(data, dtype='<f8')
    return header.tobytes() + body.tobytes() + np.asarray(trailer, dtype='<f8').tobytes()


def _unpack(raw: bytes, magic: bytes, trailer_len: int, path: Path) -> tuple[NDArray[np.float64], int, NDArray[np.float64]]:
    if len(raw) < HEADER_DTYPE.itemsize:
        raise UnsupportedFormat(f'{path}: truncated header')

    header = np.frombuffer(raw, dtype=HEADER_DTYPE, count=1)[0]
    if bytes(header['magic']) != magic:
        raise UnsupportedFormat(f'{path}: expected magic {magic!r}, found {bytes(header["magic"])!r}')
    if int(header['version']) != FORMAT_VERSION:
        raise UnsupportedFormat(f'{path}: unsupported format version {int(header["version"])}')

    n, length, fs = int(header['n']), int(header['length']), int(header['fs'])
    expected = HEADER_DTYPE.itemsize + 8 * (n * length + trailer_len)
    if len(raw) != expected:
        raise UnsupportedFormat(f'{path}: expected {expected} bytes for {n} x {length} samples, found {len(raw)}')

    values = np.frombuffer(raw, dtype='<f8', offset=HEADER_DTYPE.itemsize).astype(np.float64)
    return values[: n * length].reshape(n, length), fs, values[n * length :]


def write_airs_binary(airs: AirSet, path: str | Path) -> None:
    _write_bytes(Path(path), _pack(AIRS_MAGIC, airs.channels, airs.sample_rate))


def read_airs_binary(path: str | Path) -> AirSet:
    path = Path(path)
    data, fs, _ = _unpack(_read_bytes(path), AIRS_MAGIC, 0, path)
    return AirSet(data, fs)


def write_observations_binary(obs: ObservationSet, path: str | Path) -> None:
    _write_bytes(Path(path), _pack(OBSERVATIONS_MAGIC, obs.recordings, obs.sample_rate, [obs.noise_ratio]))


def read_observations_binary(path: str | Path) -> ObservationSet:
    path = Path(path)
    data, fs, trailer = _unpack(_read_bytes(path), OBSERVATIONS_MAGIC, 1, path)
    return ObservationSet(data, fs, float(trailer[0]))


def _columns_csv(data: NDArray[np.float64], meta: dict[str, Any]) -> str:
    buffer = io.StringIO()
    buffer.write('# ' + ','.join(f'{key}={value}' for key, value in meta.items()) + '\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow([f'ch{n}' for n in range(data.shape[0])])
    writer.writerows([format(v, '.17g') for v in row] for row in data.T)
    return buffer.getvalue()


def _parse_columns_csv(text: str, path: Path) -> tuple[NDArray[np.float64], dict[str, str]]:
    lines = text.splitlines()
    if len(lines) < 3 or not lines[0].startswith('#'):
        raise UnsupportedFormat(f'{path}: expected a "# sample_rate=..." line, a header and data rows')

    meta: dict[str, str] = {}
    for item in lines[0].lstrip('#').split(','):
        key, sep, value = item.strip().partition('=')
        if not sep:
            raise UnsupportedFormat(f'{path}: malformed metadata entry {item!r}')
        meta[key] = value

    rows = list(csv.reader(lines[1:]))
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise UnsupportedFormat(f'{path}: {exc}') from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise UnsupportedFormat(f'{path}: rows do not match the {len(header)} header columns')
    return data.T, meta


def write_airs_csv(airs: AirSet, path: str | Path) -> None:
    _write_text(Path(path), _columns_csv(airs.channels, {'sample_rate': airs.sample_rate}))


def read_airs_csv(path: str | Path) -> AirSet:
    path = Path(path)
    data, meta = _parse_columns_csv(_read_bytes(path).decode('utf-8'), path)
    try:
        return AirSet(data, int(meta['sample_rate']))
    except (KeyError, ValueError) as exc:
        raise UnsupportedFormat(f'{path}: bad sample_rate metadata') from exc


def write_observations_csv(obs: ObservationSet, path: str | Path) -> None:
    meta = {'sample_rate': obs.sample_rate, 'noise_ratio': format(obs.noise_ratio, '.17g')}
    _write_text(Path(path), _columns_csv(obs.recordings, meta))


def read_observations_csv(path: str | Path) -> ObservationSet:
    path = Path(path)
    data, meta = _parse_columns_csv(_read_bytes(path).decode('utf-8'), path)
    try:
        return ObservationSet(data, int(meta['sample_rate']), float(meta.get('noise_ratio', '0')))
    except (KeyError, ValueError) as exc:
        raise UnsupportedFormat(f'{path}: bad sample_rate / noise_ratio metadata') from exc


def read_airs(path: str | Path) -> AirSet:
    """Read an AIR file, binary or CSV by extension."""

    return read_airs_csv(path) if Path(path).suffix.lower() == '.csv' else read_airs_binary(path)


def read_observations(path: str | Path) -> ObservationSet:
    path = Path(path)
    if path.is_dir():
        path /= 'observations.bin'
    if path.suffix.lower() == '.csv':
        return read_observations_csv(path)
    return read_observations_binary(path)


def write_json(obj: Any, path: str | Path) -> None:
    _write_bytes(Path(path), orjson.dumps(obj, option=JSON_OPTIONS))


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        return orjson.loads(_read_bytes(path))
    except orjson.JSONDecodeError as exc:
        raise UnsupportedFormat(f'{path}: invalid JSON ({exc})') from None


def write_delay_matrix_csv(matrix: NDArray[np.floating[Any] | np.integer[Any]], path: str | Path) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    n = matrix.shape[0]
    writer.writerow(['', *(f'm{j}' for j in range(n))])
    for i in range(n):
        cells = ['nan' if math.isnan(float(v)) else f'{float(v):g}' for v in matrix[i]]
        writer.writerow([f'm{i}', *cells])
    _write_text(Path(path), buffer.getvalue())


def write_match_rows_csv(reports: Sequence[MatchReport], path: str | Path, *, trial: int = 0) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['trial', 'channel', 'truth_position', 'estimate_position', 'offset'])
    for channel, report in enumerate(reports):
        writer.writerows((trial, channel, *pair) for pair in report.matched_pairs)
    _write_text(Path(path), buffer.getvalue())


def write_solver_result(result: SolverResult, directory: str | Path) -> None:
    """Write ``airs.bin``, ``airs.csv`` and ``diagnostics.json`` into ``directory``."""

    directory = Path(directory)
    write_airs_binary(result.airs, directory / 'airs.bin')
    write_airs_csv(result.airs, directory / 'airs.csv')
    write_json(result.to_diagnostics(), directory / 'diagnostics.json')
