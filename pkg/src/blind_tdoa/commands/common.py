from __future__ import annotations

__all__ = (
    'AUTO',
    'CliParser',
    'HelpFormatter',
    'add_report_formats',
    'add_room_options',
    'draw_seed',
    'epsilon_value',
    'output_dir',
    'report_formats',
    'room_config',
)

import argparse
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any, NoReturn

import numpy as np

from blind_tdoa.bench import ReportFormat
from blind_tdoa.models import RoomConfig
from blind_tdoa.settings import settings
from blind_tdoa.utils.config_text import build_model, load_config_file

if TYPE_CHECKING:
    from collections.abc import Sequence


log = logging.getLogger(__name__)

AUTO = 'auto'


class CliParser(argparse.ArgumentParser):
    """Usage errors print one ``error[usage]`` line and exit with status 2."""

    def error(self, message: str) -> NoReturn:
        self.exit(2, f'error[usage] {self.prog}: {message}\n')


class HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # Options defaulting to None describe their fallback in their own help text
    def _get_help_string(self, action: argparse.Action) -> str | None:
        if action.default is None or action.default is False:
            return action.help
        return super()._get_help_string(action)


def epsilon_value(raw: str) -> float | str:
    if raw == AUTO:
        return AUTO
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected a positive number or "auto", got {raw!r}') from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f'epsilon must be positive, got {raw}')
    return value


def draw_seed(seed: int | None) -> int:
    """``seed`` itself, or fresh entropy (logged so the run can be repeated)."""

    if seed is not None:
        return seed
    fresh = int(np.random.SeedSequence().entropy) >> 65  # pyright: ignore[reportArgumentType]
    log.info(f'No --seed given, using {fresh}')
    return fresh


def output_dir(args: argparse.Namespace) -> Path:
    out = args.out or settings.output_dir
    if out is None:
        args.parser.error('--out is required when BLIND_TDOA_OUTPUT_DIR is not set')
    return Path(out)


def add_room_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('room')
    group.add_argument('--room-config', type=Path, help='key = value file with room fields')
    group.add_argument(
        '--room-dims', type=float, nargs=3, metavar=('X', 'Y', 'Z'), help='room size in metres (default: 5 4 3)'
    )
    group.add_argument('--reflection-coeff', type=float, help='wall reflection coefficient (default: 0.8)')
    group.add_argument('--speed-of-sound', type=float, help='in m/s (default: 343)')
    group.add_argument('--sample-rate', type=int, help='in Hz (default: 16000)')


def room_config(args: argparse.Namespace) -> RoomConfig:
    """Room from ``--room-config`` with the explicit room flags layered on top."""

    data: dict[str, Any] = load_config_file(args.room_config) if args.room_config else {}
    flags = {
        'dimensions': args.room_dims,
        'reflection_coeff': args.reflection_coeff,
        'speed_of_sound': args.speed_of_sound,
        'sample_rate': args.sample_rate,
    }
    data.update({key: value for key, value in flags.items() if value is not None})
    return build_model(RoomConfig, data)


def add_report_formats(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--format',
        dest='formats',
        action='append',
        choices=[str(f) for f in ReportFormat],
        help='report rendering, repeatable (default: all)',
    )


def report_formats(selected: Sequence[str] | None) -> list[ReportFormat]:
    return [ReportFormat(f) for f in selected] if selected else list(ReportFormat)
