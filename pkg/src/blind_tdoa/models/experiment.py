from __future__ import annotations

__all__ = (
    'METRICS',
    'CellResult',
    'ExperimentConfig',
    'ExperimentReport',
    'Improvement',
    'MetricName',
    'SolverComparison',
    'SolverComparisonRow',
    'TrialRow',
)

from typing import Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from blind_tdoa.constants import MATCH_THRESHOLD, MIC_COUNTS, NOISE_RATIOS
from blind_tdoa.models.metrics import MetricPair  # noqa: TC001
from blind_tdoa.models.room import RoomConfig
from blind_tdoa.models.solver import SolverConfig, SolverId
from blind_tdoa.models.strategy import CandidateNorm, Pairing

MetricName = Literal['a_ppm', 'a_pup']
METRICS: tuple[MetricName, ...] = ('a_ppm', 'a_pup')


class ExperimentConfig(BaseModel):
    """One Monte-Carlo sweep over signals, noise ratios and microphone counts."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    signals: tuple[str, ...] = Field(default=('white', 'pink'), min_length=1)
    s_values: tuple[float, ...] = Field(default=NOISE_RATIOS, min_length=1)
    n_mics_values: tuple[int, ...] = Field(default=MIC_COUNTS, min_length=1)
    z_trials: int = Field(default=50, ge=1)
    signal_length: int = Field(default=2048, ge=1)
    solver: SolverId = SolverId.IL1C
    room: RoomConfig = Field(default_factory=RoomConfig)
    solver_cfg: SolverConfig
    pairing: Pairing = Pairing.ALL_PAIRS
    candidate_norm: CandidateNorm = CandidateNorm.MAX_TAP
    cross_validate: bool = True
    match_threshold: int = Field(default=MATCH_THRESHOLD, ge=0)
    reference_s: float = 1.0
    improvements: bool = True
    master_seed: int = Field(ge=0)

    @field_validator('s_values', 'n_mics_values', mode='after')
    @classmethod
    def _sorted_unique(cls, values: tuple[Any, ...]) -> tuple[Any, ...]:
        return tuple(sorted(set(values)))

    @model_validator(mode='after')
    def _check_values(self) -> Self:
        if any(s < 0 for s in self.s_values):
            raise ValueError('noise ratios must be >= 0')
        if any(n < 2 for n in self.n_mics_values):
            raise ValueError('every microphone count must be >= 2')
        if self.improvements and 2 not in self.n_mics_values:
            raise ValueError('improvement statistics need the N=2 baseline in n_mics_values')
        if self.improvements and self.reference_s not in self.s_values:
            raise ValueError(f'reference_s {self.reference_s} is not among s_values')
        latest = self.room.max_first_order_delay()
        if self.solver_cfg.channel_len <= latest:
            raise ValueError(
                f'solver_cfg.channel_len {self.solver_cfg.channel_len} cannot hold reflections '
                f'arriving up to tap {latest} in this room'
            )
        return self


class TrialRow(BaseModel):
    """Raw outcome of one trial; the cell aggregates are a fold over these."""

    signal: str
    s: float
    n_mics: int
    trial: int
    seed: int
    ok: bool
    error: str | None = None
    epsilon: float | None = None
    truth_peaks: int = 0
    matched: int = 0
    offset_sum: int = 0
    tdoa_error: float | None = None


class CellResult(BaseModel):
    signal: str
    s: float
    n_mics: int
    n_trials: int
    n_failed: int
    valid: bool
    metrics: MetricPair | None = None


class Improvement(BaseModel):
    """Gain of N > 2 over the N = 2 baseline for one signal and metric."""

    signal: str
    metric: MetricName
    reference_s: float
    delta_avg: float | None = None
    delta_oracle: float | None = None
    oracle_n: int | None = None
    note: str | None = None


class ExperimentReport(BaseModel):
    config: ExperimentConfig
    version: str
    cells: list[CellResult]
    trials: list[TrialRow]
    improvements: list[Improvement] = Field(default_factory=list)

    def cell(self, signal: str, s: float, n_mics: int) -> CellResult | None:
        for cell in self.cells:
            if cell.signal == signal and cell.s == s and cell.n_mics == n_mics:
                return cell
        return None

    def trials_for(self, signal: str, s: float, n_mics: int) -> list[TrialRow]:
        return [t for t in self.trials if t.signal == signal and t.s == s and t.n_mics == n_mics]


class SolverComparisonRow(BaseModel):
    solver: SolverId
    s: float
    n_mics: int
    metrics: MetricPair | None
    n_failed: int


class SolverComparison(BaseModel):
    """Several solvers scored on identical trials."""

    signal: str
    rows: list[SolverComparisonRow]
    # (challenger, baseline) -> share of paired trials where the challenger did no worse on both metrics
    win_fractions: dict[str, float]
