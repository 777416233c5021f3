from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from blind_tdoa.errors import NotFoundError, ReportIOError, UnsupportedFormat
from blind_tdoa.models import AirSet, ObservationSet, SolverConfig
from blind_tdoa.solvers import tong_l2
from blind_tdoa.utils.serialization import (
    read_airs,
    read_airs_binary,
    read_json,
    read_observations,
    read_observations_binary,
    write_airs_binary,
    write_airs_csv,
    write_delay_matrix_csv,
    write_json,
    write_observations_binary,
    write_observations_csv,
    write_solver_result,
)

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path


@pytest.fixture
def airs(rng: np.random.Generator) -> AirSet:
    return AirSet(rng.standard_normal((3, 17)) * 1e-3, 8000)


@pytest.fixture
def obs(rng: np.random.Generator) -> ObservationSet:
    return ObservationSet(rng.standard_normal((2, 41)), 8000, 0.1)


def test_binary_files_are_exact(tmp_path: Path, airs: AirSet, obs: ObservationSet) -> None:
    write_airs_binary(airs, tmp_path / 'airs.bin')
    loaded = read_airs_binary(tmp_path / 'airs.bin')
    assert_array_equal(loaded.channels, airs.channels)
    assert loaded.sample_rate == 8000

    write_observations_binary(obs, tmp_path / 'obs.bin')
    back = read_observations_binary(tmp_path / 'obs.bin')
    assert_array_equal(back.recordings, obs.recordings)
    assert back.noise_ratio == 0.1
    # 16-byte header, the samples and the noise ratio trailer
    assert (tmp_path / 'obs.bin').stat().st_size == 16 + 8 * (2 * 41 + 1)


def test_csv_files_keep_every_digit(tmp_path: Path, airs: AirSet, obs: ObservationSet) -> None:
    write_airs_csv(airs, tmp_path / 'airs.csv')
    assert_array_equal(read_airs(tmp_path / 'airs.csv').channels, airs.channels)

    write_observations_csv(obs, tmp_path / 'obs.csv')
    back = read_observations(tmp_path / 'obs.csv')
    assert_array_equal(back.recordings, obs.recordings)
    assert (back.sample_rate, back.noise_ratio) == (8000, 0.1)


def test_read_observations_from_a_directory(tmp_path: Path, obs: ObservationSet) -> None:
    write_observations_binary(obs, tmp_path / 'observations.bin')
    assert_array_equal(read_observations(tmp_path).recordings, obs.recordings)


def test_wrong_magic(tmp_path: Path, airs: AirSet) -> None:
    write_airs_binary(airs, tmp_path / 'airs.bin')
    with pytest.raises(UnsupportedFormat, match='magic'):
        read_observations_binary(tmp_path / 'airs.bin')


def test_truncated_files(tmp_path: Path, airs: AirSet) -> None:
    path = tmp_path / 'airs.bin'
    write_airs_binary(airs, path)
    raw = path.read_bytes()

    path.write_bytes(raw[:-8])
    with pytest.raises(UnsupportedFormat):
        read_airs_binary(path)

    path.write_bytes(raw[:10])
    with pytest.raises(UnsupportedFormat, match='header'):
        read_airs_binary(path)


def test_malformed_csv(tmp_path: Path) -> None:
    path = tmp_path / 'airs.csv'
    path.write_text('ch0,ch1\n1,2\n3,4\n')
    with pytest.raises(UnsupportedFormat):
        read_airs(path)

    path.write_text('# sample_rate=8000\nch0,ch1\n1,2\n3,x\n')
    with pytest.raises(UnsupportedFormat):
        read_airs(path)


def test_missing_and_unwritable_paths(tmp_path: Path, airs: AirSet) -> None:
    with pytest.raises(NotFoundError):
        read_airs_binary(tmp_path / 'nope.bin')

    blocker = tmp_path / 'file'
    blocker.write_text('')
    with pytest.raises(ReportIOError):
        write_airs_binary(airs, blocker / 'airs.bin')


def test_json_files(tmp_path: Path) -> None:
    write_json({'values': np.arange(3), 'nested': {1: 'a'}}, tmp_path / 'x.json')
    assert read_json(tmp_path / 'x.json') == {'values': [0, 1, 2], 'nested': {'1': 'a'}}

    (tmp_path / 'bad.json').write_text('{')
    with pytest.raises(UnsupportedFormat):
        read_json(tmp_path / 'bad.json')


def test_delay_matrix_csv(tmp_path: Path) -> None:
    matrix = np.array([[0.0, -5.0], [5.0, np.nan]])
    write_delay_matrix_csv(matrix, tmp_path / 'tdoa.csv')
    assert (tmp_path / 'tdoa.csv').read_text().splitlines() == [',m0,m1', 'm0,0,-5', 'm1,5,nan']


def test_solver_result_files(tmp_path: Path, make_gaussian: Callable[..., tuple[AirSet, ObservationSet]]) -> None:
    _, observations = make_gaussian(n_mics=2, channel_len=4, length=60)
    result = tong_l2(observations, SolverConfig(channel_len=4))
    write_solver_result(result, tmp_path / 'out')

    assert_array_equal(read_airs(tmp_path / 'out' / 'airs.bin').channels, result.airs.channels)
    assert_array_equal(read_airs(tmp_path / 'out' / 'airs.csv').channels, result.airs.channels)
    diagnostics = read_json(tmp_path / 'out' / 'diagnostics.json')
    assert diagnostics['solver'] == 'tong'
    assert diagnostics['channel_len'] == 4
    assert diagnostics['identifiable'] is True
