from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from blind_tdoa.errors import InvalidArgument, NotFoundError
from blind_tdoa.models import ExperimentConfig, Il1cInit, SolverConfig, SolverId
from blind_tdoa.utils.config_text import build_model, dump_config_text, load_config_file, parse_config_text

if TYPE_CHECKING:
    from pathlib import Path


def test_parse_sections_lists_and_comments() -> None:
    text = """
    # sweep
    signals = white, pink
    z_trials = 5   # quick
    room.dimensions = [1.6, 1.2, 1.0]
    room.sample_rate = 8000
    solver_cfg.epsilon = none
    solver_cfg.channel_len = 64
    n_mics_values = []
    """
    assert parse_config_text(text) == {
        'signals': ['white', 'pink'],
        'z_trials': '5',
        'room': {'dimensions': ['1.6', '1.2', '1.0'], 'sample_rate': '8000'},
        'solver_cfg': {'channel_len': '64'},
        'n_mics_values': [],
    }


@pytest.mark.parametrize(
    'text,line',
    [
        ('a = 1\njust words\n', 2),
        ('= 3\n', 1),
        ('room = small\nroom.dimensions = 1, 2, 3\n', 2),
    ],
)
def test_parse_reports_the_line(text: str, line: int) -> None:
    with pytest.raises(InvalidArgument, match=f'line {line}'):
        parse_config_text(text)


def test_solver_config_text_round_trip() -> None:
    cfg = SolverConfig(
        channel_len=96,
        epsilon=3.25,
        max_outer_iters=7,
        il1c_init=Il1cInit.NONNEG_ANCHOR,
        epsilon_multipliers=(0.1, 3.0),
    )
    assert SolverConfig.from_text(cfg.to_text()) == cfg
    assert 'anchor_index' not in cfg.to_text()


def test_dump_formats_scalars() -> None:
    assert dump_config_text({'a': True, 'b': {'c': 0.1, 'd': [1, 2]}, 'e': None}) == 'a = true\nb.c = 0.1\nb.d = [1, 2]\n'


def test_build_model_reports_the_field() -> None:
    with pytest.raises(InvalidArgument, match='channel_len'):
        build_model(SolverConfig, {'channel_len': '0'})
    with pytest.raises(InvalidArgument):
        build_model(SolverConfig, {'channel_len': '8', 'bogus': '1'})


def test_experiment_config_from_text(tmp_path: Path) -> None:
    path = tmp_path / 'sweep.cfg'
    path.write_text(
        'signals = white\n'
        's_values = 1.0, 0.0\n'
        'n_mics_values = [3, 2]\n'
        'z_trials = 2\n'
        'solver = il1c-ensemble\n'
        'room.dimensions = 1.6, 1.2, 1.0\n'
        'room.sample_rate = 8000\n'
        'solver_cfg.channel_len = 64\n'
        'master_seed = 5\n'
    )
    cfg = build_model(ExperimentConfig, load_config_file(path))
    assert cfg.s_values == (0.0, 1.0)
    assert cfg.n_mics_values == (2, 3)
    assert cfg.solver is SolverId.IL1C_ENSEMBLE
    assert cfg.room.dimensions == (1.6, 1.2, 1.0)

    with pytest.raises(NotFoundError):
        load_config_file(tmp_path / 'missing.cfg')


def test_single_values_fill_sequence_fields() -> None:
    data = parse_config_text(
        'signals = white\n'
        's_values = 0.5\n'
        'n_mics_values = 2\n'
        'reference_s = 0.5\n'
        'room.sample_rate = 8000\n'
        'room.dimensions = 1.6, 1.2, 1.0\n'
        'solver_cfg.channel_len = 64\n'
        'solver_cfg.epsilon_multipliers = 2.0\n'
        'master_seed = 1\n'
    )
    cfg = build_model(ExperimentConfig, data)
    assert cfg.signals == ('white',)
    assert cfg.s_values == (0.5,)
    assert cfg.n_mics_values == (2,)
    assert cfg.solver_cfg.epsilon_multipliers == (2.0,)
