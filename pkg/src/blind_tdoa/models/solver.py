from __future__ import annotations

__all__ = (
    'EpsilonSelection',
    'Il1cInit',
    'QpOutcome',
    'SlackVariables',
    'SolverConfig',
    'SolverId',
    'SolverResult',
)

from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from blind_tdoa.errors import DegenerateInitialization, InvalidArgument
from blind_tdoa.settings import settings
from blind_tdoa.utils.config_text import build_model, dump_config_text, parse_config_text

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from blind_tdoa.models.room import AirSet


class SolverId(StrEnum):
    TONG = 'tong'
    ANCHOR_L1 = 'anchor-l1'
    NN_ANCHOR_L1 = 'nn-anchor-l1'
    IL1C = 'il1c'
    IL1C_INCREMENTAL = 'il1c-incremental'
    IL1C_ENSEMBLE = 'il1c-ensemble'

    @property
    def uses_epsilon(self) -> bool:
        return self is not SolverId.TONG


class Il1cInit(StrEnum):
    TONG = 'tong'
    NONNEG_ANCHOR = 'nonneg-anchor'


class SolverConfig(BaseModel):
    """Parameters shared by every blind identification solver.

    ``epsilon`` left unset means "twice the L1 mass of the solver's own
    initializer"; ``anchor_index`` left unset means "largest tap of the
    first channel of the eigenvector solution".
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    channel_len: int = Field(ge=1)
    epsilon: float | None = Field(default=None, gt=0)
    anchor_index: int | None = Field(default=None, ge=0)
    max_outer_iters: int = Field(default=20, ge=1)
    max_inner_iters: int = Field(default=5000, ge=1)
    tol_inner: float = Field(default=1e-6, gt=0)
    tol_outer: float = Field(default=1e-4, gt=0)
    seed: int = 0

    il1c_init: Il1cInit = Il1cInit.TONG
    cv_folds: int = Field(default=3, ge=2)
    epsilon_multipliers: tuple[float, ...] = Field(default=(0.5, 1.0, 2.0, 4.0, 8.0), min_length=1)
    dense_threshold: int = Field(default_factory=lambda: settings.dense_threshold, ge=1)

    @model_validator(mode='after')
    def _check_anchor(self) -> Self:
        if self.anchor_index is not None and self.anchor_index >= self.channel_len:
            raise ValueError(f'anchor_index {self.anchor_index} must be below channel_len {self.channel_len}')
        if any(m <= 0 for m in self.epsilon_multipliers):
            raise ValueError('epsilon multipliers must be positive')
        return self

    def to_text(self) -> str:
        return dump_config_text(self.model_dump(mode='json'))

    @classmethod
    def from_text(cls, text: str) -> SolverConfig:
        return build_model(cls, parse_config_text(text))


@dataclass(frozen=True, slots=True)
class SlackVariables:
    """The p_n vectors of the slack-normalized problem, one row per channel."""

    vectors: NDArray[np.float64]

    def __post_init__(self) -> None:
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise InvalidArgument(f'slack vectors must be (channels, taps), got shape {vectors.shape}')
        if np.any(vectors < 0):
            raise InvalidArgument('slack vectors must be non-negative')
        dead = [n for n, row in enumerate(vectors) if not np.any(row > 0)]
        if dead:
            raise DegenerateInitialization(f'slack vector is identically zero on channel(s) {dead}')
        vectors.flags.writeable = False
        object.__setattr__(self, 'vectors', vectors)

    @classmethod
    def from_initializer(cls, channels: NDArray[np.float64]) -> SlackVariables:
        """Rectify ``channels`` and scale every row so its largest tap is 1."""

        rectified = np.clip(channels, 0.0, None)
        peak = rectified.max(axis=1)
        dead = np.flatnonzero(peak <= 0)
        if dead.size:
            raise DegenerateInitialization(
                f'rectified initializer vanished on channel(s) {dead.tolist()}'
            )
        return cls(rectified / peak[:, None])

    @classmethod
    def from_estimate(cls, channels: NDArray[np.float64]) -> SlackVariables:
        """Slack vectors for which ``channels`` satisfies every ``p_n . h_n = 1``."""

        energy = np.einsum('nk,nk->n', channels, channels)
        if np.any(energy <= 0):
            raise DegenerateInitialization('estimate has an all-zero channel')
        return cls(np.clip(channels, 0.0, None) / energy[:, None])

    @property
    def n_mics(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def feasibility_floor(self) -> float:
        """Smallest total L1 budget for which the slack-normalized set is non-empty."""

        return float(np.sum(1.0 / self.vectors.max(axis=1)))

    def unit_point(self) -> NDArray[np.float64]:
        """``p_n / |p_n|^2`` per channel, the minimum-norm point meeting every equality."""

        energy = np.einsum('nk,nk->n', self.vectors, self.vectors)
        return self.vectors / energy[:, None]

    def default_epsilon(self) -> float:
        return 2.0 * float(self.unit_point().sum())


@dataclass(frozen=True, slots=True)
class QpOutcome:
    x: NDArray[np.float64]
    objective: float
    iterations: int
    kkt_residual: float
    converged: bool
    polished: bool = False


@dataclass(frozen=True, slots=True)
class EpsilonSelection:
    epsilon: float
    scores: dict[float, float]
    skipped: tuple[float, ...] = ()


@dataclass(frozen=True, slots=True)
class SolverResult:
    """Estimated AIRs plus the diagnostics of the run that produced them."""

    airs: AirSet
    objective_trace: tuple[float, ...]
    constraint_report: dict[str, float]
    outer_iters: int
    converged: bool
    solver: SolverId
    epsilon: float | None = None
    slack: SlackVariables | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def max_violation(self) -> float:
        return max(self.constraint_report.values(), default=0.0)

    def to_diagnostics(self) -> dict[str, Any]:
        return {
            'solver': str(self.solver),
            'epsilon': self.epsilon,
            'objective_trace': list(self.objective_trace),
            'constraint_report': self.constraint_report,
            'outer_iters': self.outer_iters,
            'converged': self.converged,
            'n_mics': self.airs.n_mics,
            'channel_len': self.airs.channel_len,
            **self.diagnostics,
        }
