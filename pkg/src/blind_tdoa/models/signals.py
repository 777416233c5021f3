from __future__ import annotations

__all__ = ('NoiseSpec', 'SourceSignal', 'as_samples', 'rms')

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from blind_tdoa.constants import DEFAULT_SAMPLE_RATE
from blind_tdoa.errors import InvalidArgument

if TYPE_CHECKING:
    from numpy.typing import NDArray


def as_samples(values: NDArray[np.float64] | list[float], *, name: str) -> NDArray[np.float64]:
    """Return a read-only float64 copy of a 1-D sample sequence."""

    samples = np.array(values, dtype=np.float64)
    if samples.ndim != 1:
        raise InvalidArgument(f'{name} must be one-dimensional, got shape {samples.shape}')
    samples.flags.writeable = False
    return samples


def rms(samples: NDArray[np.float64]) -> float:
    return float(np.sqrt(np.mean(np.square(samples))))


@dataclass(frozen=True, slots=True)
class SourceSignal:
    """Waveform of the unknown emitter.

    Parameters
    ----------
    samples:
        Dimensionless amplitudes, at least one, all finite, non-silent.
    sample_rate:
        Sampling rate in Hz.
    label:
        Provenance tag such as ``'white'``, ``'pink'`` or ``'file:<path>'``.
    """

    samples: NDArray[np.float64]
    sample_rate: int = DEFAULT_SAMPLE_RATE
    label: str = ''

    def __post_init__(self) -> None:
        samples = as_samples(self.samples, name='samples')
        if samples.size == 0:
            raise InvalidArgument('source signal is empty')
        if not np.all(np.isfinite(samples)):
            raise InvalidArgument('source signal contains non-finite samples')
        if rms(samples) <= 0.0:
            raise InvalidArgument(f'source signal {self.label or "<unnamed>"} is silent')
        if self.sample_rate <= 0:
            raise InvalidArgument(f'sample rate must be positive, got {self.sample_rate}')
        object.__setattr__(self, 'samples', samples)

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True, slots=True)
class NoiseSpec:
    """Additive white Gaussian noise calibrated as a ratio of each channel's RMS."""

    ratio_s: float
    seed: int = 0
