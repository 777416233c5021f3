from __future__ import annotations

__all__ = ('DESK_ROOM', 'Preset', 'preset_config')

from enum import StrEnum
from typing import TYPE_CHECKING, Any, Final

from blind_tdoa.constants import MIC_COUNTS, NOISE_RATIOS
from blind_tdoa.models import ExperimentConfig, RoomConfig, SolverConfig

if TYPE_CHECKING:
    from collections.abc import Sequence


# Small enough that every first-order reflection fits in 64 taps at 8 kHz
DESK_ROOM: Final = RoomConfig(dimensions=(1.6, 1.2, 1.0), sample_rate=8000)


class Preset(StrEnum):
    DESK = 'desk'
    PAPER_SHAPE = 'paper-shape'


def _desk(master_seed: int, extra_signals: Sequence[str], overrides: dict[str, Any]) -> ExperimentConfig:
    solver_cfg = SolverConfig(
        channel_len=64,
        max_outer_iters=10,
        max_inner_iters=1000,
        tol_outer=1e-3,
        epsilon_multipliers=(1.0, 2.0, 4.0),
    )
    return ExperimentConfig(**{
        'signals': ('white', 'pink', *extra_signals),
        's_values': (0.01, 1.0),
        'n_mics_values': (2, 3, 4),
        'z_trials': 10,
        'signal_length': 2048,
        'room': DESK_ROOM,
        'solver_cfg': solver_cfg,
        'master_seed': master_seed,
        **overrides,
    })


def _paper_shape(master_seed: int, extra_signals: Sequence[str], overrides: dict[str, Any]) -> ExperimentConfig:
    room = RoomConfig()
    channel_len = room.max_first_order_delay() + 1
    return ExperimentConfig(**{
        'signals': ('white', 'pink', *extra_signals),
        's_values': NOISE_RATIOS,
        'n_mics_values': MIC_COUNTS,
        'z_trials': 50,
        'signal_length': 10 * channel_len,
        'room': room,
        'solver_cfg': SolverConfig(channel_len=channel_len),
        'master_seed': master_seed,
        **overrides,
    })


def preset_config(
    preset: Preset,
    *,
    master_seed: int,
    extra_signals: Sequence[str] = (),
    **overrides: Any,
) -> ExperimentConfig:
    """Ready-made sweeps.

    ``desk`` is a quick run in a small room at 8 kHz with 64-tap channels;
    ``paper-shape`` sweeps the full grid of noise ratios and microphone
    counts in the default room with channels long enough for every
    first-order reflection. ``extra_signals`` appends source specs such as
    ``file:<path>``; keyword overrides replace any other field.
    """

    match preset:
        case Preset.DESK:
            return _desk(master_seed, extra_signals, overrides)
        case Preset.PAPER_SHAPE:
            return _paper_shape(master_seed, extra_signals, overrides)
