from __future__ import annotations

__all__ = ('CandidateNorm', 'Pairing', 'StrategyConfig')

from enum import StrEnum

from pydantic import BaseModel, ConfigDict

from blind_tdoa.models.solver import SolverConfig  # noqa: TC001


class Pairing(StrEnum):
    ALL_PAIRS = 'all-pairs'
    RANDOM_MATCHING = 'random-matching'


class CandidateNorm(StrEnum):
    MAX_TAP = 'max-tap'
    UNIT_L1 = 'unit-l1'


class StrategyConfig(BaseModel):
    """Options of the multi-microphone strategies layered on the slack solver."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    base: SolverConfig
    mic_order_seed: int = 0
    pairing: Pairing = Pairing.ALL_PAIRS
    candidate_norm: CandidateNorm = CandidateNorm.MAX_TAP
