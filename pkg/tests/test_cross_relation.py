from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from numpy.testing import assert_allclose

from blind_tdoa.cross_relation import (
    CrossRelationSystem,
    assemble_normal_matrix,
    build_conv_matrix,
    cross_residual,
)
from blind_tdoa.errors import InvalidArgument
from blind_tdoa.models import AirSet, ObservationSet

if TYPE_CHECKING:
    from collections.abc import Callable


def test_conv_matrix_layout() -> None:
    conv = build_conv_matrix(np.array([1.0, 2.0, 3.0]), 2)
    assert conv.shape == (4, 2)
    assert_allclose(conv.to_dense(), [[1, 0], [2, 1], [3, 2], [0, 3]])


def test_conv_matrix_products_match_dense(rng: np.random.Generator) -> None:
    y = rng.standard_normal(40)
    conv = build_conv_matrix(y, 6)
    dense = conv.to_dense()
    h = rng.standard_normal(6)
    r = rng.standard_normal(45)
    assert_allclose(conv.matvec(h), dense @ h, atol=1e-12)
    assert_allclose(conv.rmatvec(r), dense.T @ r, atol=1e-12)


def test_conv_matrix_rejects_long_channels() -> None:
    with pytest.raises(InvalidArgument):
        build_conv_matrix(np.ones(4), 5)
    with pytest.raises(InvalidArgument):
        build_conv_matrix(np.ones(4), 0)


@pytest.mark.parametrize('n_mics', [2, 3, 5])
def test_gram_matches_operator(n_mics: int, rng: np.random.Generator) -> None:
    obs = ObservationSet(rng.standard_normal((n_mics, 60)))
    system = CrossRelationSystem.from_observations(obs, 5)
    h = rng.standard_normal(system.size)

    r = system.apply(h)
    assert r.size == system.residual_len
    assert_allclose(system.gram @ h, system.adjoint(r), rtol=1e-9, atol=1e-9)
    assert system.residual(h) == pytest.approx(float(r @ r), rel=1e-9)
    assert system.trace == pytest.approx(float(np.trace(system.gram)), rel=1e-9)


def test_adjoint_identity(rng: np.random.Generator) -> None:
    obs = ObservationSet(rng.standard_normal((3, 50)))
    system = CrossRelationSystem.from_observations(obs, 4)
    h = rng.standard_normal(system.size)
    r = rng.standard_normal(system.residual_len)
    assert float(system.apply(h) @ r) == pytest.approx(float(h @ system.adjoint(r)), rel=1e-10)


def test_matrix_free_path_matches_dense(rng: np.random.Generator) -> None:
    obs = ObservationSet(rng.standard_normal((3, 80)))
    dense = CrossRelationSystem.from_observations(obs, 6)
    free = CrossRelationSystem.from_observations(obs, 6, dense_threshold=1)
    assert dense.is_dense
    assert not free.is_dense

    h = rng.standard_normal(dense.size)
    assert_allclose(free.normal_matvec(h), dense.normal_matvec(h), rtol=1e-9, atol=1e-9)
    assert free.residual(h) == pytest.approx(dense.residual(h), rel=1e-9)
    assert_allclose(free.normal_operator() @ h, dense.gram @ h, rtol=1e-9, atol=1e-9)


def test_segments_add_up(rng: np.random.Generator) -> None:
    a, b = rng.standard_normal((2, 40)), rng.standard_normal((2, 30))
    joint = CrossRelationSystem([a, b], 4)
    h = rng.standard_normal(joint.size)
    parts = [CrossRelationSystem([seg], 4).residual(h) for seg in (a, b)]
    assert joint.residual(h) == pytest.approx(sum(parts), rel=1e-10)


@pytest.mark.parametrize('seed', range(100))
def test_noiseless_residual_vanishes(seed: int, make_gaussian: Callable[..., tuple[AirSet, ObservationSet]]) -> None:
    rng = np.random.default_rng(seed)
    n_mics = int(rng.integers(2, 6))
    channel_len = int(rng.integers(2, 17))
    airs, obs = make_gaussian(n_mics=n_mics, channel_len=channel_len, length=10 * channel_len, seed=seed)

    scale = sum(float(np.sum(y**2)) for y in obs.recordings) * float(np.sum(airs.channels**2))
    assert cross_residual(obs, airs) <= 1e-10 * scale


def test_swapped_channels_leave_a_residual(make_gaussian: Callable[..., tuple[AirSet, ObservationSet]]) -> None:
    airs, obs = make_gaussian(n_mics=2, channel_len=6, length=120)
    swapped = AirSet(airs.channels[::-1])
    assert cross_residual(obs, swapped) > 1e-3


def test_identical_recordings_with_single_tap() -> None:
    y = np.array([1.0, -2.0, 0.5, 3.0])
    obs = ObservationSet(np.vstack([y, y]))
    q = assemble_normal_matrix(obs, 1)
    values, vectors = np.linalg.eigh(q)
    assert values[0] == pytest.approx(0.0, abs=1e-12)
    null = vectors[:, 0] / vectors[0, 0]
    assert_allclose(null, [1.0, 1.0])


def test_residual_shape_checks(rng: np.random.Generator) -> None:
    obs = ObservationSet(rng.standard_normal((2, 20)))
    with pytest.raises(InvalidArgument):
        cross_residual(obs, AirSet(rng.standard_normal((3, 4))))
    with pytest.raises(InvalidArgument):
        cross_residual(obs, AirSet(rng.standard_normal((2, 21))))
    with pytest.raises(InvalidArgument):
        CrossRelationSystem.from_observations(ObservationSet(rng.standard_normal((1, 20))), 4)


@pytest.mark.parametrize('alpha', [-3.0, 0.5, 7.25])
def test_residual_scales_quadratically(alpha: float, make_gaussian: Callable[..., tuple[AirSet, ObservationSet]]) -> None:
    airs, obs = make_gaussian(n_mics=3, channel_len=6, length=120, seed=4, s=0.2)
    base = cross_residual(obs, airs)
    assert base > 0.0
    scaled = cross_residual(obs, AirSet(alpha * airs.channels, airs.sample_rate))
    assert scaled == pytest.approx(alpha**2 * base, rel=1e-10)
