from __future__ import annotations

__all__ = ('ensemble_il1c', 'incremental_il1c', 'run_solver', 'select_pairs')

import logging
from itertools import combinations
from typing import TYPE_CHECKING

import numpy as np

from blind_tdoa.cross_relation import CrossRelationSystem, cross_residual
from blind_tdoa.errors import BlindTdoaError, DegenerateInitialization, EnsembleFailure, InvalidArgument
from blind_tdoa.models import (
    AirSet,
    CandidateNorm,
    Pairing,
    SlackVariables,
    SolverId,
    SolverResult,
    StrategyConfig,
)
from blind_tdoa.solvers import anchor_l1, cross_validate_epsilon, il1c, initializer_channels, nonneg_anchor_l1, tong_l2
from blind_tdoa.utils.pool import map_in_process_pool

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from blind_tdoa.models import ObservationSet, SolverConfig


log = logging.getLogger(__name__)


def _scaled_epsilon(cfg: SolverConfig, k: int, n_mics: int) -> SolverConfig:
    # A numeric budget is given for the whole array; a k-microphone subproblem gets its share
    if cfg.epsilon is None or k == n_mics:
        return cfg
    return cfg.model_copy(update={'epsilon': cfg.epsilon * k / n_mics})


def incremental_il1c(obs: ObservationSet, cfg: StrategyConfig) -> SolverResult:
    """Grow the array one microphone at a time, re-solving every channel at each step.

    The first two microphones are drawn with ``mic_order_seed`` and solved
    as a pair. Every later step adds one microphone: channels solved before
    keep their estimate as slack vector (``p = h / |h|^2``), the newcomer is
    initialized from the rectified ``il1c_init`` solution of the enlarged set.
    """

    n_mics = obs.n_mics
    if n_mics < 2:
        raise InvalidArgument(f'incremental solving needs at least 2 microphones, got {n_mics}')

    rng = np.random.default_rng(cfg.mic_order_seed)
    order = [int(m) for m in rng.permutation(n_mics)]
    mics = sorted(order[:2])
    base = cfg.base

    result = il1c(obs.subset(mics), _scaled_epsilon(base, 2, n_mics))
    steps = [{'mics': list(mics), 'epsilon': result.epsilon, 'objective': result.objective_trace[-1]}]

    for step, newcomer in enumerate(order[2:], start=3):
        mics = [*mics, newcomer]
        sub_obs = obs.subset(mics)
        step_cfg = _scaled_epsilon(base, len(mics), n_mics)
        system = CrossRelationSystem.from_observations(
            sub_obs, base.channel_len, dense_threshold=base.dense_threshold
        )

        fresh = np.clip(initializer_channels(system, base)[-1], 0.0, None)
        if not np.any(fresh > 0):
            raise DegenerateInitialization(
                f'rectified {base.il1c_init} initializer vanished for microphone {newcomer}', step=step
            )
        fresh /= fresh.max()

        solved = np.asarray(result.airs.channels)
        try:
            previous = SlackVariables.from_estimate(solved)
        except DegenerateInitialization as exc:
            raise DegenerateInitialization(str(exc), step=step) from None
        slack = SlackVariables(np.vstack([previous.vectors, fresh]))
        start = np.vstack([solved, fresh / (fresh @ fresh)])

        result = il1c(sub_obs, step_cfg, slack=slack, start=start)
        steps.append({'mics': list(mics), 'epsilon': result.epsilon, 'objective': result.objective_trace[-1]})
        log.debug(f'Incremental step {step}: added microphone {newcomer}, objective {result.objective_trace[-1]:.6e}')

    # Back to the caller's microphone order
    inverse = np.argsort(mics)
    channels = np.asarray(result.airs.channels)[inverse]
    slack = None if result.slack is None else SlackVariables(result.slack.vectors[inverse])

    return SolverResult(
        airs=AirSet(channels, obs.sample_rate),
        objective_trace=result.objective_trace,
        constraint_report=result.constraint_report,
        outer_iters=result.outer_iters,
        converged=result.converged,
        solver=SolverId.IL1C_INCREMENTAL,
        epsilon=result.epsilon,
        slack=slack,
        diagnostics={'mic_order': mics, 'passes': len(steps), 'steps': steps},
    )


def select_pairs(n_mics: int, pairing: Pairing, seed: int) -> list[tuple[int, int]]:
    if pairing is Pairing.ALL_PAIRS:
        if n_mics < 3:
            raise InvalidArgument(f'all-pairs ensembles need at least 3 microphones, got {n_mics}')
        return list(combinations(range(n_mics), 2))

    if n_mics < 2 or n_mics % 2:
        raise InvalidArgument(f'a random perfect matching needs an even number of microphones, got {n_mics}')
    perm = np.random.default_rng(seed).permutation(n_mics)
    return sorted((int(min(a, b)), int(max(a, b))) for a, b in perm.reshape(-1, 2))


def _solve_pair(
    task: tuple[ObservationSet, SolverConfig, tuple[int, int]],
) -> tuple[NDArray[np.float64] | None, float | None, str | None]:
    obs, cfg, pair = task
    try:
        result = il1c(obs.subset(pair), cfg)
    except BlindTdoaError as exc:
        return None, None, f'{exc.code}: {exc}'
    return np.asarray(result.airs.channels), result.objective_trace[-1], None


def _normalize(candidate: NDArray[np.float64], norm: CandidateNorm) -> NDArray[np.float64]:
    if norm is CandidateNorm.UNIT_L1:
        return candidate / np.abs(candidate).sum()
    return candidate / np.abs(candidate).max()


def ensemble_il1c(obs: ObservationSet, cfg: StrategyConfig, *, jobs: int = 1) -> SolverResult:
    """Average pairwise estimates of every microphone.

    Each selected pair is solved on its own; a microphone's candidates are
    normalized (``candidate_norm``) and averaged. Failed pairs are dropped.
    Pairs run in a process pool when ``jobs > 1``; the reduction follows
    pair order, so the result does not depend on completion order.
    """

    n_mics = obs.n_mics
    pairs = select_pairs(n_mics, cfg.pairing, cfg.mic_order_seed)
    pair_cfg = _scaled_epsilon(cfg.base, 2, n_mics)

    outcomes = map_in_process_pool(_solve_pair, [(obs, pair_cfg, pair) for pair in pairs], jobs=jobs)

    candidates: list[list[NDArray[np.float64]]] = [[] for _ in range(n_mics)]
    pair_residuals: dict[str, float] = {}
    failed: dict[str, str] = {}
    for pair, (channels, residual, error) in zip(pairs, outcomes, strict=True):
        key = f'{pair[0]}-{pair[1]}'
        if channels is None or residual is None:
            log.warning(f'Dropping pair {key}: {error}')
            failed[key] = error or 'unknown'
            continue
        pair_residuals[key] = residual
        for slot, mic in enumerate(pair):
            candidates[mic].append(_normalize(channels[slot], cfg.candidate_norm))

    empty = [m for m, found in enumerate(candidates) if not found]
    if empty:
        raise EnsembleFailure(f'microphone(s) {empty} have no surviving pair estimate')

    averaged = np.stack([np.mean(found, axis=0) for found in candidates])
    airs = AirSet(averaged, obs.sample_rate)

    return SolverResult(
        airs=airs,
        objective_trace=(cross_residual(obs, airs),),
        constraint_report={'nonnegativity': max(-float(averaged.min()), 0.0)},
        outer_iters=len(pair_residuals),
        converged=not failed,
        solver=SolverId.IL1C_ENSEMBLE,
        epsilon=pair_cfg.epsilon,
        diagnostics={
            'pairs': [list(p) for p in pairs],
            'pair_residuals': pair_residuals,
            'failed_pairs': failed,
            'candidate_counts': [len(found) for found in candidates],
        },
    )


def run_solver(
    obs: ObservationSet,
    solver_id: SolverId,
    cfg: StrategyConfig,
    *,
    auto_epsilon: bool = False,
    jobs: int = 1,
) -> SolverResult:
    """Run one solver or strategy, cross-validating the L1 budget first when asked."""

    base = cfg.base
    selection = None
    if auto_epsilon and solver_id.uses_epsilon:
        cv_solver = solver_id if solver_id in {SolverId.ANCHOR_L1, SolverId.NN_ANCHOR_L1} else SolverId.IL1C
        selection = cross_validate_epsilon(obs, base.model_copy(update={'epsilon': None}), solver=cv_solver)
        base = base.model_copy(update={'epsilon': selection.epsilon})
        cfg = cfg.model_copy(update={'base': base})

    match solver_id:
        case SolverId.TONG:
            result = tong_l2(obs, base)
        case SolverId.ANCHOR_L1:
            result = anchor_l1(obs, base)
        case SolverId.NN_ANCHOR_L1:
            result = nonneg_anchor_l1(obs, base)
        case SolverId.IL1C:
            result = il1c(obs, base)
        case SolverId.IL1C_INCREMENTAL:
            result = incremental_il1c(obs, cfg)
        case SolverId.IL1C_ENSEMBLE:
            result = ensemble_il1c(obs, cfg, jobs=jobs)

    if selection is not None:
        result.diagnostics['cv_scores'] = {f'{eps:.17g}': score for eps, score in selection.scores.items()}
        result.diagnostics['cv_skipped'] = list(selection.skipped)
    return result
