from __future__ import annotations

import sys
from typing import TYPE_CHECKING

from blind_tdoa.commands import build_parser
from blind_tdoa.errors import BlindTdoaError
from blind_tdoa.settings import settings
from blind_tdoa.utils.logger import setup_logging

if TYPE_CHECKING:
    from collections.abc import Sequence


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    file_log = settings.log_file or settings.log_dir is not None
    with setup_logging(args.log_level, file_log=file_log, log_dir=settings.log_dir):
        try:
            args.handler(args)
        except BlindTdoaError as exc:
            message = ' '.join(str(exc).split())
            print(f'error[{exc.code}] {message}', file=sys.stderr)
            return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
