from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from blind_tdoa.errors import DegenerateInitialization, InfeasibleConstraints, InvalidArgument
from blind_tdoa.models import AirSet, Il1cInit, ObservationSet, SlackVariables, SolverConfig, SolverId
from blind_tdoa.peaks_metrics import estimate_tdoas, subspace_error
from blind_tdoa.room_sim import ground_truth_tdoas
from blind_tdoa.solvers import anchor_l1, blind, cross_validate_epsilon, il1c, nonneg_anchor_l1, tong_l2

if TYPE_CHECKING:
    from collections.abc import Callable

    Factory = Callable[..., tuple[AirSet, ObservationSet]]


@pytest.mark.parametrize('seed', range(50))
def test_tong_recovers_coprime_channels(seed: int, make_gaussian: Factory) -> None:
    rng = np.random.default_rng(500 + seed)
    n_mics = int(rng.integers(2, 5))
    channel_len = int(rng.integers(4, 11))
    airs, obs = make_gaussian(n_mics=n_mics, channel_len=channel_len, length=10 * channel_len + 20, seed=seed)

    result = tong_l2(obs, SolverConfig(channel_len=channel_len))
    assert subspace_error(airs, result.airs) <= 1e-6
    assert result.diagnostics['identifiable']
    assert result.solver is SolverId.TONG
    assert float(np.sum(result.airs.channels**2)) == pytest.approx(1.0)


def test_tong_flags_a_common_zero(rng: np.random.Generator) -> None:
    common = np.array([1.0, -1.0])
    channels = np.stack([np.convolve(rng.standard_normal(5), common) for _ in range(2)])
    airs = AirSet(channels)
    src = rng.standard_normal(200)
    obs = ObservationSet(np.stack([np.convolve(h, src) for h in airs.channels]))

    result = tong_l2(obs, SolverConfig(channel_len=6))
    assert not result.diagnostics['identifiable']


def test_anchor_l1_noiseless_recovery(make_gaussian: Factory) -> None:
    airs, obs = make_gaussian(n_mics=3, channel_len=6, length=120, seed=3)
    result = anchor_l1(obs, SolverConfig(channel_len=6))

    anchor = result.diagnostics['anchor_index']
    assert anchor == int(np.argmax(np.abs(airs.channels[0])))
    scaled = airs.channels / airs.channels[0, anchor]
    assert_allclose(result.airs.channels, scaled, atol=1e-4)
    assert result.epsilon == pytest.approx(2.0 * np.abs(scaled).sum(), rel=1e-6)
    assert max(result.constraint_report.values()) <= 1e-8


def test_nonneg_anchor_l1_noiseless_recovery(make_sparse: Factory) -> None:
    airs, obs = make_sparse(n_mics=2, channel_len=10, length=200, seed=5)
    result = nonneg_anchor_l1(obs, SolverConfig(channel_len=10))

    assert result.diagnostics['anchor_index'] == 0
    assert_allclose(result.airs.channels, airs.channels, atol=1e-4)
    assert result.airs.channels.min() >= 0.0


def test_anchor_below_unit_budget_is_infeasible(make_gaussian: Factory) -> None:
    _, obs = make_gaussian(n_mics=2, channel_len=4, length=60)
    with pytest.raises(InfeasibleConstraints):
        anchor_l1(obs, SolverConfig(channel_len=4, epsilon=0.5))


def test_explicit_anchor_index(make_gaussian: Factory) -> None:
    airs, obs = make_gaussian(n_mics=2, channel_len=5, length=80, seed=8)
    result = anchor_l1(obs, SolverConfig(channel_len=5, anchor_index=2, epsilon=1e3))
    assert result.airs.channels[0, 2] == pytest.approx(1.0)
    assert_allclose(result.airs.channels, airs.channels / airs.channels[0, 2], atol=1e-4)


def test_slack_initializer_rejects_vanishing_channels() -> None:
    with pytest.raises(DegenerateInitialization):
        SlackVariables.from_initializer(np.array([[0.5, 1.0], [-1.0, -0.2]]))
    slack = SlackVariables.from_initializer(np.array([[0.5, 2.0], [-1.0, 0.25]]))
    assert_allclose(slack.vectors, [[0.25, 1.0], [0.0, 1.0]])
    assert slack.feasibility_floor == pytest.approx(2.0)


def test_il1c_result_contract(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=3, channel_len=10, length=300, seed=2, s=0.1)
    cfg = SolverConfig(channel_len=10, max_outer_iters=8, tol_outer=1e-12, tol_inner=1e-8)
    result = il1c(obs, cfg)

    assert result.solver is SolverId.IL1C
    assert result.outer_iters == len(result.objective_trace) <= 8
    assert result.slack is not None
    assert result.airs.channels.min() >= 0.0
    assert max(result.constraint_report.values()) <= 10 * cfg.tol_inner
    assert result.airs.channels.sum() <= result.epsilon * (1 + 1e-9)

    trace = np.asarray(result.objective_trace)
    assert np.all(trace[1:] <= trace[:-1] * (1 + 1e-9) + 1e-12)


def test_il1c_default_budget_is_twice_the_unit_mass(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=2, channel_len=8, length=200, seed=4)
    result = il1c(obs, SolverConfig(channel_len=8, max_outer_iters=1))
    floor = result.diagnostics['feasibility_floor']
    assert floor == pytest.approx(2.0)
    assert result.epsilon >= floor


def test_il1c_below_floor_is_infeasible(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=3, channel_len=8, length=200)
    # max-normalized slack vectors put the floor at N
    with pytest.raises(InfeasibleConstraints):
        il1c(obs, SolverConfig(channel_len=8, epsilon=2.5))


def test_il1c_noiseless_direct_paths(make_sparse: Factory) -> None:
    airs, obs = make_sparse(n_mics=2, channel_len=12, length=400, seed=6)
    truth = airs.channels / np.einsum('nk,nk->n', airs.channels, airs.channels)[:, None]
    cfg = SolverConfig(channel_len=12, epsilon=1.5 * float(truth.sum()))
    result = il1c(obs, cfg)
    assert_array_equal(estimate_tdoas(result.airs), ground_truth_tdoas(airs))


def test_il1c_nonneg_anchor_initializer(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=2, channel_len=8, length=200, seed=9)
    result = il1c(obs, SolverConfig(channel_len=8, il1c_init=Il1cInit.NONNEG_ANCHOR, max_outer_iters=3))
    assert result.diagnostics['initializer'] == 'nonneg-anchor'
    assert max(result.constraint_report.values()) <= 1e-5


def test_il1c_accepts_explicit_slack(make_sparse: Factory) -> None:
    airs, obs = make_sparse(n_mics=2, channel_len=8, length=200, seed=1)
    slack = SlackVariables.from_estimate(airs.channels)
    result = il1c(obs, SolverConfig(channel_len=8, max_outer_iters=2), slack=slack)
    assert result.objective_trace[0] <= 1e-8 * obs.recordings.var() * obs.length

    with pytest.raises(InvalidArgument):
        il1c(obs, SolverConfig(channel_len=8), slack=SlackVariables(np.ones((3, 8))))


def test_cross_validation_single_candidate(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=2, channel_len=8, length=300, s=0.05)
    cfg = SolverConfig(channel_len=8, max_outer_iters=3)
    selection = cross_validate_epsilon(obs, cfg, [10.0])
    assert selection.epsilon == 10.0
    assert list(selection.scores) == [10.0]


def test_cross_validation_default_grid(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=2, channel_len=8, length=300, s=0.05)
    cfg = SolverConfig(channel_len=8, max_outer_iters=3, epsilon_multipliers=(0.5, 1.0, 2.0, 4.0))
    selection = cross_validate_epsilon(obs, cfg)
    assert selection.epsilon in selection.scores
    assert len(selection.scores) + len(selection.skipped) == 4
    assert min(selection.scores.values()) == selection.scores[selection.epsilon]


def test_cross_validation_for_anchor_solvers(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=2, channel_len=8, length=300, s=0.05)
    cfg = SolverConfig(channel_len=8, epsilon_multipliers=(1.0, 2.0))
    selection = cross_validate_epsilon(obs, cfg, solver=SolverId.NN_ANCHOR_L1)
    assert selection.epsilon in selection.scores

    with pytest.raises(InvalidArgument):
        cross_validate_epsilon(obs, cfg, solver=SolverId.TONG)


def test_cross_validation_errors(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=2, channel_len=8, length=300, s=0.05)
    cfg = SolverConfig(channel_len=8, max_outer_iters=2)
    with pytest.raises(InfeasibleConstraints):
        cross_validate_epsilon(obs, cfg, [0.5, 1.0])
    with pytest.raises(InvalidArgument):
        cross_validate_epsilon(obs, cfg, [])
    with pytest.raises(InvalidArgument):
        cross_validate_epsilon(obs, SolverConfig(channel_len=8, cv_folds=20), [10.0])


def test_tong_with_matrix_free_products(make_gaussian: Factory) -> None:
    airs, obs = make_gaussian(n_mics=3, channel_len=8, length=200, seed=31)
    dense = tong_l2(obs, SolverConfig(channel_len=8))
    matrix_free = tong_l2(obs, SolverConfig(channel_len=8, dense_threshold=1))
    assert subspace_error(airs, matrix_free.airs) <= 1e-6
    assert_allclose(matrix_free.airs.channels, dense.airs.channels, atol=1e-10)
    assert matrix_free.diagnostics['identifiable']


def test_tong_by_lobpcg(make_gaussian: Factory, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(blind, 'EIGEN_DENSE_LIMIT', 0)
    airs, obs = make_gaussian(n_mics=3, channel_len=8, length=200, seed=32)
    result = tong_l2(obs, SolverConfig(channel_len=8, dense_threshold=1))
    assert subspace_error(airs, result.airs) <= 1e-4
    assert result.diagnostics['identifiable']


def test_il1c_with_matrix_free_products(make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=3, channel_len=10, length=300, seed=33, s=0.05)
    cfg = SolverConfig(channel_len=10, max_outer_iters=3, tol_inner=1e-8, dense_threshold=1)
    result = il1c(obs, cfg)
    assert result.airs.channels.min() >= 0.0
    assert max(result.constraint_report.values()) <= 10 * cfg.tol_inner


@pytest.mark.parametrize('perm', [(2, 0, 1), (1, 2, 0), (0, 2, 1)])
def test_tong_is_permutation_equivariant(perm: tuple[int, ...], make_gaussian: Factory) -> None:
    _, obs = make_gaussian(n_mics=3, channel_len=6, length=150, seed=34, s=0.05)
    cfg = SolverConfig(channel_len=6)
    reference = tong_l2(obs, cfg)
    permuted = tong_l2(obs.subset(list(perm)), cfg)
    assert_allclose(permuted.airs.channels, reference.airs.channels[list(perm)], atol=1e-8)


@pytest.mark.parametrize('perm', [(2, 0, 1), (1, 2, 0)])
def test_il1c_is_permutation_equivariant(perm: tuple[int, ...], make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=3, channel_len=10, length=300, seed=35, s=0.05)
    cfg = SolverConfig(channel_len=10, max_outer_iters=3, tol_outer=1e-12, tol_inner=1e-10)
    reference = il1c(obs, cfg)
    permuted = il1c(obs.subset(list(perm)), cfg)
    assert_allclose(permuted.airs.channels, reference.airs.channels[list(perm)], atol=1e-6)
    assert_array_equal(
        np.argmax(permuted.airs.channels, axis=1), np.argmax(reference.airs.channels, axis=1)[list(perm)]
    )


@pytest.mark.parametrize('seed', range(5))
def test_nonneg_anchor_never_beats_the_plain_anchor(seed: int, make_sparse: Factory) -> None:
    _, obs = make_sparse(n_mics=2, channel_len=8, length=200, seed=40 + seed, s=0.2)
    cfg = SolverConfig(channel_len=8, anchor_index=0, epsilon=4.0, tol_inner=1e-9)
    plain = anchor_l1(obs, cfg)
    nonneg = nonneg_anchor_l1(obs, cfg)
    assert nonneg.objective_trace[0] >= plain.objective_trace[0] * (1 - 1e-6)


@pytest.mark.slow
@pytest.mark.parametrize('seed', range(50))
def test_noisy_instances_keep_their_constraints(seed: int, make_sparse: Factory) -> None:
    rng = np.random.default_rng(900 + seed)
    n_mics = int(rng.integers(2, 5))
    channel_len = int(rng.choice([8, 10, 12]))
    s = float(rng.choice([0.01, 0.1, 0.5]))
    _, obs = make_sparse(n_mics=n_mics, channel_len=channel_len, length=30 * channel_len, seed=seed, s=s)
    cfg = SolverConfig(channel_len=channel_len, max_outer_iters=6, tol_inner=1e-8)

    for solver in (tong_l2, anchor_l1, nonneg_anchor_l1, il1c):
        result = solver(obs, cfg)
        assert max(result.constraint_report.values()) <= 10 * cfg.tol_inner, solver.__name__
        if solver in (nonneg_anchor_l1, il1c):
            assert result.airs.channels.min() >= 0.0

    trace = np.asarray(result.objective_trace)
    assert np.all(trace[1:] <= trace[:-1] * (1 + cfg.tol_outer) + 1e-12)


@pytest.mark.slow
def test_noiseless_il1c_tdoas(make_sparse: Factory) -> None:
    hits = 0
    for seed in range(50):
        airs, obs = make_sparse(n_mics=2, channel_len=12, length=400, seed=300 + seed)
        result = il1c(obs, SolverConfig(channel_len=12))
        error = np.abs(estimate_tdoas(result.airs) - ground_truth_tdoas(airs))
        hits += bool(np.all(error <= 1))
    assert hits >= 45
