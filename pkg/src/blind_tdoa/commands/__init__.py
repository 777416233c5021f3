from __future__ import annotations

__all__ = ('COMMANDS', 'build_parser')

from blind_tdoa import __version__
from blind_tdoa.settings import settings

from . import benchmark, metrics, report, simulate, solve
from .common import CliParser

COMMANDS = (simulate, solve, benchmark, metrics, report)
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def build_parser() -> CliParser:
    parser = CliParser(prog='blind-tdoa', description='Blind AIR identification and TDOA estimation.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument(
        '--log-level',
        type=str.upper,
        choices=LOG_LEVELS,
        default=settings.log_level.upper(),
        help='console log level (default: %(default)s)',
    )
    subparsers = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')
    for command in COMMANDS:
        command.setup(subparsers)
    return parser
