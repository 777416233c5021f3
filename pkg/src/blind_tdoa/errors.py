from __future__ import annotations

__all__ = (
    'BlindTdoaError',
    'ChannelTooShort',
    'DegenerateInitialization',
    'EnsembleFailure',
    'EstimationFailure',
    'InfeasibleConstraints',
    'InfeasibleGeometry',
    'InvalidArgument',
    'NotFoundError',
    'NumericalFailure',
    'ReportIOError',
    'UndefinedRelativeImprovement',
    'UnsupportedFormat',
)

from typing import ClassVar


class BlindTdoaError(Exception):
    """Base class for every domain error raised by the package.

    ``code`` is the stable machine-readable name printed by the CLI.
    """

    code: ClassVar[str] = 'error'


class InvalidArgument(BlindTdoaError, ValueError):
    code = 'invalid-argument'


class NotFoundError(BlindTdoaError, FileNotFoundError):
    code = 'not-found'


class UnsupportedFormat(BlindTdoaError):
    code = 'unsupported-format'


class ChannelTooShort(BlindTdoaError):
    code = 'channel-too-short'

    def __init__(self, required_len: int, channel_len: int) -> None:
        self.required_len: int = required_len
        self.channel_len: int = channel_len
        super().__init__(
            f'channel length {channel_len} is too short, at least {required_len} taps are required'
        )


class InfeasibleGeometry(BlindTdoaError):
    code = 'infeasible-geometry'


class NumericalFailure(BlindTdoaError):
    code = 'numerical-failure'


class InfeasibleConstraints(BlindTdoaError):
    code = 'infeasible-constraints'


class DegenerateInitialization(BlindTdoaError):
    code = 'degenerate-initialization'

    def __init__(self, message: str, *, step: int | None = None) -> None:
        self.step: int | None = step
        if step is not None:
            message = f'{message} (step {step})'
        super().__init__(message)


class EstimationFailure(BlindTdoaError):
    code = 'estimation-failure'


class EnsembleFailure(BlindTdoaError):
    code = 'ensemble-failure'


class UndefinedRelativeImprovement(BlindTdoaError):
    code = 'undefined-relative-improvement'


class ReportIOError(BlindTdoaError, OSError):
    code = 'io-error'
