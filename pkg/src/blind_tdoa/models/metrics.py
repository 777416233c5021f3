from __future__ import annotations

__all__ = ('MatchReport', 'MatchedPair', 'MetricPair', 'PeakList')

from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from blind_tdoa.errors import InvalidArgument

if TYPE_CHECKING:
    from numpy.typing import NDArray


@dataclass(frozen=True, slots=True)
class PeakList:
    """Peak positions (samples, strictly increasing) with their positive amplitudes."""

    positions: NDArray[np.int64]
    amplitudes: NDArray[np.float64]

    def __post_init__(self) -> None:
        positions = np.array(self.positions, dtype=np.int64).reshape(-1)
        amplitudes = np.array(self.amplitudes, dtype=np.float64).reshape(-1)
        if positions.size != amplitudes.size:
            raise InvalidArgument(f'{positions.size} peak positions but {amplitudes.size} amplitudes')
        if np.any(np.diff(positions) <= 0):
            raise InvalidArgument('peak positions must be strictly increasing')
        if np.any(amplitudes <= 0):
            raise InvalidArgument('peak amplitudes must be positive')
        positions.flags.writeable = False
        amplitudes.flags.writeable = False
        object.__setattr__(self, 'positions', positions)
        object.__setattr__(self, 'amplitudes', amplitudes)

    @classmethod
    def empty(cls) -> PeakList:
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))

    def __len__(self) -> int:
        return int(self.positions.size)


class MatchedPair(NamedTuple):
    truth_position: int
    estimate_position: int
    offset: int


@dataclass(frozen=True, slots=True)
class MatchReport:
    matched_pairs: tuple[MatchedPair, ...]
    unmatched_truth_count: int
    threshold: int

    @property
    def n_matched(self) -> int:
        return len(self.matched_pairs)

    @property
    def truth_count(self) -> int:
        return self.n_matched + self.unmatched_truth_count

    @property
    def offset_sum(self) -> int:
        return sum(pair.offset for pair in self.matched_pairs)


class MetricPair(BaseModel):
    """Average peak position mismatch (samples) and unmatched-peak fraction."""

    model_config = ConfigDict(frozen=True)

    a_ppm: float = Field(ge=0)
    a_pup: float = Field(ge=0, le=1)
