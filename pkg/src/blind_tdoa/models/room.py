from __future__ import annotations

__all__ = ('AirSet', 'Geometry', 'ObservationSet', 'Point', 'RoomConfig')

from dataclasses import dataclass
from itertools import combinations, pairwise
from typing import TYPE_CHECKING, Annotated

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from blind_tdoa.constants import (
    DEFAULT_REFLECTION_COEFF,
    DEFAULT_ROOM_DIMENSIONS,
    DEFAULT_SAMPLE_RATE,
    DEFAULT_SPEED_OF_SOUND,
    WALL_MARGIN,
)
from blind_tdoa.errors import InvalidArgument

if TYPE_CHECKING:
    from numpy.typing import NDArray


Point = tuple[float, float, float]
PositiveFloat = Annotated[float, Field(gt=0)]


class RoomConfig(BaseModel):
    """Shoebox room used by the first-order image method."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    dimensions: tuple[PositiveFloat, PositiveFloat, PositiveFloat] = DEFAULT_ROOM_DIMENSIONS
    reflection_coeff: float = Field(default=DEFAULT_REFLECTION_COEFF, ge=0.0, le=1.0)
    speed_of_sound: float = Field(default=DEFAULT_SPEED_OF_SOUND, gt=0.0)
    sample_rate: int = Field(default=DEFAULT_SAMPLE_RATE, gt=0)

    def max_first_order_delay(self, margin: float = WALL_MARGIN) -> int:
        """Latest first-order tap, in samples, over every placement keeping ``margin`` from the walls."""

        dims = np.asarray(self.dimensions, dtype=np.float64)
        spans = np.maximum(dims - 2.0 * margin, 0.0)
        longest = 0.0
        for axis in range(3):
            across = spans.copy()
            across[axis] = 2.0 * dims[axis] - 2.0 * margin
            longest = max(longest, float(np.linalg.norm(across)))
        return int(np.rint(longest * self.sample_rate / self.speed_of_sound))


class Geometry(BaseModel):
    """Source and microphone positions in metres."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    source_pos: Point
    mic_pos: tuple[Point, ...] = Field(min_length=2)

    @property
    def n_mics(self) -> int:
        return len(self.mic_pos)

    def validate_inside(self, room: RoomConfig) -> None:
        """Raise ``InvalidArgument`` unless every point is strictly inside ``room``."""

        dims = np.asarray(room.dimensions)
        labelled = [('source', self.source_pos)]
        labelled.extend((f'mic {i}', p) for i, p in enumerate(self.mic_pos))
        for label, point in labelled:
            arr = np.asarray(point)
            if np.any(arr <= 0.0) or np.any(arr >= dims):
                raise InvalidArgument(f'{label} position {point} is not strictly inside the room {room.dimensions}')

        mics = np.asarray(self.mic_pos)
        for i, j in combinations(range(len(mics)), 2):
            if np.allclose(mics[i], mics[j]):
                raise InvalidArgument(f'microphones {i} and {j} share the same position')


def _as_channels(values: NDArray[np.float64], *, name: str) -> NDArray[np.float64]:
    channels = np.array(values, dtype=np.float64)
    if channels.ndim != 2:
        raise InvalidArgument(f'{name} must be a 2-D (channels, samples) array, got shape {channels.shape}')
    if channels.shape[0] < 1 or channels.shape[1] < 1:
        raise InvalidArgument(f'{name} must hold at least one channel and one sample')
    if not np.all(np.isfinite(channels)):
        raise InvalidArgument(f'{name} contains non-finite values')
    channels.flags.writeable = False
    return channels


@dataclass(frozen=True, slots=True)
class AirSet:
    """N impulse responses of common length L, stored as an (N, L) array."""

    channels: NDArray[np.float64]
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        channels = _as_channels(self.channels, name='AIR channels')
        empty = [n for n, row in enumerate(channels) if not np.any(row)]
        if empty:
            raise InvalidArgument(f'AIR channels {empty} have no nonzero tap')
        object.__setattr__(self, 'channels', channels)

    @property
    def n_mics(self) -> int:
        return int(self.channels.shape[0])

    @property
    def channel_len(self) -> int:
        return int(self.channels.shape[1])

    def stacked(self) -> NDArray[np.float64]:
        return self.channels.reshape(-1).copy()

    @classmethod
    def from_stacked(cls, h: NDArray[np.float64], n_mics: int, sample_rate: int) -> AirSet:
        return cls(np.asarray(h, dtype=np.float64).reshape(n_mics, -1), sample_rate)

    def subset(self, mics: list[int] | tuple[int, ...]) -> AirSet:
        return AirSet(self.channels[list(mics)], self.sample_rate)


@dataclass(frozen=True, slots=True)
class ObservationSet:
    """N microphone recordings of common length, plus the noise ratio used."""

    recordings: NDArray[np.float64]
    sample_rate: int = DEFAULT_SAMPLE_RATE
    noise_ratio: float = 0.0

    def __post_init__(self) -> None:
        recordings = _as_channels(self.recordings, name='recordings')
        if self.noise_ratio < 0:
            raise InvalidArgument(f'noise ratio must be >= 0, got {self.noise_ratio}')
        object.__setattr__(self, 'recordings', recordings)

    @property
    def n_mics(self) -> int:
        return int(self.recordings.shape[0])

    @property
    def length(self) -> int:
        return int(self.recordings.shape[1])

    def subset(self, mics: list[int] | tuple[int, ...]) -> ObservationSet:
        return ObservationSet(self.recordings[list(mics)], self.sample_rate, self.noise_ratio)

    def segments(self, folds: int) -> list[ObservationSet]:
        """Split every recording into ``folds`` contiguous, equally long pieces."""

        bounds = np.linspace(0, self.length, folds + 1).astype(int)
        return [
            ObservationSet(self.recordings[:, start:stop], self.sample_rate, self.noise_ratio)
            for start, stop in pairwise(bounds)
        ]
