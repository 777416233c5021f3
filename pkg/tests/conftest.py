from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from blind_tdoa.bench import DESK_ROOM
from blind_tdoa.models import AirSet, ExperimentConfig, NoiseSpec, ObservationSet, SolverConfig
from blind_tdoa.room_sim import synthesize_observations
from blind_tdoa.signal_gen import gen_white_noise, inject_noise

if TYPE_CHECKING:
    from collections.abc import Callable


SAMPLE_RATE = 8000


def gaussian_airs(n_mics: int, channel_len: int, seed: int) -> AirSet:
    """Dense random channels; every tap is nonzero, so they share no common zero."""

    rng = np.random.default_rng(seed)
    return AirSet(rng.standard_normal((n_mics, channel_len)), SAMPLE_RATE)


def sparse_airs(n_mics: int, channel_len: int, seed: int) -> AirSet:
    """Non-negative room-like channels: a dominant direct path and a few weaker echoes.

    Channel 0 starts at tap 0 and the last channel reaches the final tap,
    so no shift of the stack keeps the cross relations satisfied.
    """

    rng = np.random.default_rng(seed)
    channels = np.zeros((n_mics, channel_len))
    for n in range(n_mics):
        direct = 0 if n == 0 else int(rng.integers(0, channel_len // 3))
        channels[n, direct] = 1.0
        echoes = rng.choice(np.arange(direct + 2, channel_len), size=3, replace=False)
        channels[n, echoes] = rng.uniform(0.1, 0.4, size=3)
    channels[-1, -1] = 0.3
    return AirSet(channels, SAMPLE_RATE)


def observe(airs: AirSet, length: int, seed: int, s: float = 0.0) -> ObservationSet:
    clean = synthesize_observations(airs, gen_white_noise(length, seed, sample_rate=airs.sample_rate))
    return inject_noise(clean, NoiseSpec(s, seed + 1))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def make_gaussian() -> Callable[..., tuple[AirSet, ObservationSet]]:
    def factory(
        n_mics: int = 2, channel_len: int = 8, length: int = 200, seed: int = 0, s: float = 0.0
    ) -> tuple[AirSet, ObservationSet]:
        airs = gaussian_airs(n_mics, channel_len, seed)
        return airs, observe(airs, length, seed + 100, s)

    return factory


@pytest.fixture
def make_sparse() -> Callable[..., tuple[AirSet, ObservationSet]]:
    def factory(
        n_mics: int = 2, channel_len: int = 12, length: int = 400, seed: int = 0, s: float = 0.0
    ) -> tuple[AirSet, ObservationSet]:
        airs = sparse_airs(n_mics, channel_len, seed)
        return airs, observe(airs, length, seed + 100, s)

    return factory


@pytest.fixture
def fast_solver_cfg() -> SolverConfig:
    return SolverConfig(
        channel_len=64,
        max_outer_iters=4,
        max_inner_iters=400,
        tol_outer=1e-3,
        epsilon_multipliers=(1.0, 2.0),
    )


@pytest.fixture
def tiny_experiment(fast_solver_cfg: SolverConfig) -> ExperimentConfig:
    return ExperimentConfig(
        signals=('white',),
        s_values=(0.01, 1.0),
        n_mics_values=(2, 3),
        z_trials=2,
        signal_length=512,
        room=DESK_ROOM,
        solver_cfg=fast_solver_cfg,
        cross_validate=False,
        master_seed=11,
    )
