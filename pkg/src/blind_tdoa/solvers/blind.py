from __future__ import annotations

__all__ = (
    'anchor_l1',
    'cross_validate_epsilon',
    'il1c',
    'initial_slack',
    'initializer_channels',
    'nonneg_anchor_l1',
    'solve_slack_qp',
    'tong_l2',
    'tong_vector',
)

import logging
import warnings
from typing import TYPE_CHECKING

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import lobpcg

from blind_tdoa.cross_relation import CrossRelationSystem
from blind_tdoa.errors import (
    DegenerateInitialization,
    EstimationFailure,
    InfeasibleConstraints,
    InvalidArgument,
    NumericalFailure,
)
from blind_tdoa.models import (
    AirSet,
    EpsilonSelection,
    Il1cInit,
    SlackVariables,
    SolverId,
    SolverResult,
)
from blind_tdoa.solvers.projections import AnchorSet, SlackSet
from blind_tdoa.solvers.qp import largest_eigenvalue, minimize_quadratic

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from blind_tdoa.models import ObservationSet, QpOutcome, SolverConfig


log = logging.getLogger(__name__)

EIGENGAP_RATIO = 10.0
NULLSPACE_RTOL = 1e-8
# Largest N*L whose normal matrix is materialized for the eigendecomposition (~540 MB)
EIGEN_DENSE_LIMIT = 8192
LOBPCG_BLOCK = 4
LOBPCG_RTOL = 1e-10


def _system(obs: ObservationSet, cfg: SolverConfig) -> CrossRelationSystem:
    return CrossRelationSystem.from_observations(obs, cfg.channel_len, dense_threshold=cfg.dense_threshold)


def _as_airs(h: NDArray[np.float64], system: CrossRelationSystem, sample_rate: int) -> AirSet:
    channels = np.asarray(h, dtype=np.float64).reshape(system.n_mics, system.channel_len)
    dead = [n for n, row in enumerate(channels) if not np.any(row)]
    if dead:
        raise EstimationFailure(f'the L1 budget collapsed channel(s) {dead} to zero')
    return AirSet(channels, sample_rate)


def _lobpcg_eigenpairs(system: CrossRelationSystem) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    start = np.random.default_rng(system.size).standard_normal((system.size, LOBPCG_BLOCK))
    tol = LOBPCG_RTOL * system.trace / system.size
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always', UserWarning)
        values, vectors = lobpcg(
            system.normal_operator(),
            start,
            largest=False,
            tol=tol,
            maxiter=max(500, system.size // 4),
        )
    if caught:
        raise NumericalFailure(f'LOBPCG did not reach tolerance {tol:.2e}: {caught[-1].message}')

    order = np.argsort(values)[:2]
    return values[order], vectors[:, order]


def _smallest_eigenpairs(system: CrossRelationSystem) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    # Krylov iterations on the plain operator stall at the bottom of A^T A
    if system.size > EIGEN_DENSE_LIMIT:
        log.info(f'Normal matrix of size {system.size} is too large to materialize, using LOBPCG')
        return _lobpcg_eigenpairs(system)
    try:
        values, vectors = linalg.eigh(system.gram, subset_by_index=[0, 1])
    except linalg.LinAlgError as exc:
        raise NumericalFailure(f'eigendecomposition of the normal matrix failed: {exc}') from exc
    return values, vectors


def tong_vector(system: CrossRelationSystem) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Unit-norm minimizer of the cross-relation residual and the two smallest eigenvalues.

    The sign is fixed so the largest-magnitude entry is positive.
    """

    values, vectors = _smallest_eigenpairs(system)
    h = vectors[:, 0] / np.linalg.norm(vectors[:, 0])
    if h[np.argmax(np.abs(h))] < 0:
        h = -h
    return h, values


def _identifiable(values: NDArray[np.float64], system: CrossRelationSystem) -> bool:
    low, second = float(values[0]), float(values[1])
    return second > EIGENGAP_RATIO * max(low, 0.0) and second > NULLSPACE_RTOL * system.trace / system.size


def tong_l2(obs: ObservationSet, cfg: SolverConfig) -> SolverResult:
    """Closed-form solution under ``sum_n |h_n|_2^2 = 1``: the bottom eigenvector of ``A^T A``."""

    system = _system(obs, cfg)
    h, values = tong_vector(system)
    identifiable = _identifiable(values, system)
    if not identifiable:
        log.warning(
            f'Smallest eigenspace is not one-dimensional (eigenvalues {values[0]:.3e}, {values[1]:.3e}); '
            'the channels likely share a common zero'
        )

    return SolverResult(
        airs=_as_airs(h, system, obs.sample_rate),
        objective_trace=(system.residual(h),),
        constraint_report={'unit_norm': abs(float(h @ h) - 1.0)},
        outer_iters=1,
        converged=True,
        solver=SolverId.TONG,
        diagnostics={'eigenvalues': [float(v) for v in values], 'identifiable': identifiable},
    )


def _solve_anchor(
    system: CrossRelationSystem,
    cfg: SolverConfig,
    *,
    nonneg: bool,
    epsilon: float | None = None,
    tong: NDArray[np.float64] | None = None,
) -> tuple[QpOutcome, AnchorSet]:
    if tong is None:
        tong, _ = tong_vector(system)
    first = tong[: system.channel_len]
    anchor = cfg.anchor_index if cfg.anchor_index is not None else int(np.argmax(np.abs(first)))
    if abs(first[anchor]) <= np.finfo(np.float64).eps * np.abs(first).max(initial=0.0):
        raise DegenerateInitialization(f'eigenvector solution vanishes at anchor tap {anchor}')

    init = tong / first[anchor]
    if nonneg:
        init = np.clip(init, 0.0, None)
    if epsilon is None:
        epsilon = cfg.epsilon if cfg.epsilon is not None else max(2.0 * float(np.abs(init).sum()), 1.0)

    feasible = AnchorSet(system.size, anchor, epsilon, nonneg=nonneg)
    outcome = minimize_quadratic(
        system.normal_operator(),
        feasible,
        init,
        tol=cfg.tol_inner,
        max_iter=cfg.max_inner_iters,
        polish=system.is_dense,
    )
    return outcome, feasible


def _anchor_result(obs: ObservationSet, cfg: SolverConfig, *, nonneg: bool) -> SolverResult:
    system = _system(obs, cfg)
    outcome, feasible = _solve_anchor(system, cfg, nonneg=nonneg)
    if not outcome.converged:
        log.warning(f'Anchor QP stopped at the iteration cap with KKT residual {outcome.kkt_residual:.2e}')

    return SolverResult(
        airs=_as_airs(outcome.x, system, obs.sample_rate),
        objective_trace=(outcome.objective,),
        constraint_report=feasible.violations(outcome.x),
        outer_iters=1,
        converged=outcome.converged,
        solver=SolverId.NN_ANCHOR_L1 if nonneg else SolverId.ANCHOR_L1,
        epsilon=feasible.epsilon,
        diagnostics={
            'anchor_index': feasible.anchor,
            'inner_iterations': [outcome.iterations],
            'kkt_residual': outcome.kkt_residual,
            'polished': outcome.polished,
        },
    )


def anchor_l1(obs: ObservationSet, cfg: SolverConfig) -> SolverResult:
    """Minimize the cross-relation residual with ``h_1(a) = 1`` and ``sum_n |h_n|_1 <= epsilon``."""

    return _anchor_result(obs, cfg, nonneg=False)


def nonneg_anchor_l1(obs: ObservationSet, cfg: SolverConfig) -> SolverResult:
    """As :func:`anchor_l1`, with every tap constrained to be non-negative."""

    return _anchor_result(obs, cfg, nonneg=True)


def initializer_channels(system: CrossRelationSystem, cfg: SolverConfig) -> NDArray[np.float64]:
    """The (N, L) estimate selected by ``il1c_init``, before rectification."""

    if cfg.il1c_init is Il1cInit.NONNEG_ANCHOR:
        outcome, _ = _solve_anchor(system, cfg.model_copy(update={'epsilon': None}), nonneg=True)
        h = outcome.x
    else:
        h, _ = tong_vector(system)
    return h.reshape(system.n_mics, system.channel_len)


def initial_slack(system: CrossRelationSystem, cfg: SolverConfig) -> SlackVariables:
    """Rectified, max-normalized initializer for the slack vectors."""

    return SlackVariables.from_initializer(initializer_channels(system, cfg))


def solve_slack_qp(
    system: CrossRelationSystem,
    slack: SlackVariables,
    epsilon: float,
    cfg: SolverConfig,
    start: NDArray[np.float64] | None = None,
    *,
    lipschitz: float | None = None,
) -> QpOutcome:
    """Minimize the residual over ``{h >= 0, sum(h) <= epsilon, p_n . h_n = 1}`` for fixed ``p``."""

    feasible = SlackSet(slack.vectors, epsilon)
    if start is None:
        start = slack.unit_point()
    return minimize_quadratic(
        system.normal_operator(),
        feasible,
        np.asarray(start, dtype=np.float64).reshape(-1),
        tol=cfg.tol_inner,
        max_iter=cfg.max_inner_iters,
        lipschitz=lipschitz,
        polish=system.is_dense,
    )


def _solve_il1c(
    system: CrossRelationSystem,
    cfg: SolverConfig,
    sample_rate: int,
    *,
    epsilon: float | None = None,
    slack: SlackVariables | None = None,
    start: NDArray[np.float64] | None = None,
) -> SolverResult:
    if slack is None:
        slack = initial_slack(system, cfg)
    if slack.vectors.shape != (system.n_mics, system.channel_len):
        raise InvalidArgument(
            f'slack vectors of shape {slack.vectors.shape} do not fit '
            f'{system.n_mics} channels of {system.channel_len} taps'
        )
    if epsilon is None:
        epsilon = cfg.epsilon if cfg.epsilon is not None else slack.default_epsilon()
    floor = slack.feasibility_floor
    if epsilon < floor * (1 - 1e-12):
        raise InfeasibleConstraints(f'epsilon {epsilon:g} is below the feasibility floor {floor:g}')

    lipschitz = largest_eigenvalue(system.normal_operator())
    x = slack.unit_point().reshape(-1) if start is None else np.asarray(start, dtype=np.float64).reshape(-1)

    trace: list[float] = []
    changes: list[float] = []
    inner_iterations: list[int] = []
    inner_converged = True
    converged = False
    previous: NDArray[np.float64] | None = None
    report: dict[str, float] = {}

    for outer in range(1, cfg.max_outer_iters + 1):
        outcome = solve_slack_qp(system, slack, epsilon, cfg, x, lipschitz=lipschitz)
        h = outcome.x
        trace.append(outcome.objective)
        inner_iterations.append(outcome.iterations)
        inner_converged = inner_converged and outcome.converged
        report = SlackSet(slack.vectors, epsilon).violations(h)

        change = float('inf') if previous is None else float(np.linalg.norm(h - previous) / np.linalg.norm(h))
        changes.append(change)
        log.debug(f'Alternation {outer}: objective {outcome.objective:.6e}, relative change {change:.3e}')
        if change < cfg.tol_outer:
            converged = True
            break

        previous, x = h, h
        slack = SlackVariables.from_estimate(h.reshape(system.n_mics, system.channel_len))

    return SolverResult(
        airs=_as_airs(h, system, sample_rate),
        objective_trace=tuple(trace),
        constraint_report=report,
        outer_iters=len(trace),
        converged=converged,
        solver=SolverId.IL1C,
        epsilon=epsilon,
        slack=slack,
        diagnostics={
            'feasibility_floor': floor,
            'initializer': str(cfg.il1c_init),
            'outer_changes': [c if np.isfinite(c) else None for c in changes],
            'inner_iterations': inner_iterations,
            'inner_converged': inner_converged,
        },
    )


def il1c(
    obs: ObservationSet,
    cfg: SolverConfig,
    *,
    slack: SlackVariables | None = None,
    start: NDArray[np.float64] | None = None,
) -> SolverResult:
    """Alternate the slack-normalized QP in ``h`` with the update ``p_n <- h_n / |h_n|^2``.

    ``slack`` and ``start`` override the initializer, which the incremental
    strategy uses to carry earlier estimates forward.
    """

    return _solve_il1c(_system(obs, cfg), cfg, obs.sample_rate, slack=slack, start=start)


def _default_grid(system: CrossRelationSystem, cfg: SolverConfig, solver: SolverId) -> list[float]:
    if solver is SolverId.IL1C:
        mass = float(initial_slack(system, cfg).unit_point().sum())
    else:
        tong, _ = tong_vector(system)
        first = tong[: system.channel_len]
        anchor = cfg.anchor_index if cfg.anchor_index is not None else int(np.argmax(np.abs(first)))
        init = tong / first[anchor]
        if solver is SolverId.NN_ANCHOR_L1:
            init = np.clip(init, 0.0, None)
        mass = float(np.abs(init).sum())
    return [m * mass for m in cfg.epsilon_multipliers]


def cross_validate_epsilon(
    obs: ObservationSet,
    cfg: SolverConfig,
    grid: Sequence[float] | None = None,
    *,
    solver: SolverId = SolverId.IL1C,
) -> EpsilonSelection:
    """Pick the L1 budget with the lowest mean held-out cross-relation residual.

    Recordings are cut into ``cfg.cv_folds`` contiguous segments; each fold
    trains on the others and scores the unit-norm estimate on the held-out
    one. Budgets infeasible on any fold are skipped. Ties go to the smaller
    budget.
    """

    if solver not in {SolverId.IL1C, SolverId.ANCHOR_L1, SolverId.NN_ANCHOR_L1}:
        raise InvalidArgument(f'solver {solver} has no L1 budget to cross-validate')

    folds = cfg.cv_folds
    min_len = 2 * cfg.channel_len
    if obs.length // folds < min_len:
        raise InvalidArgument(
            f'recordings of {obs.length} samples cannot be split into {folds} segments of >= {min_len} samples'
        )

    if grid is None:
        grid = _default_grid(_system(obs, cfg), cfg, solver)
    candidates = sorted({float(e) for e in grid})
    if not candidates:
        raise InvalidArgument('epsilon grid is empty')

    segments = obs.segments(folds)
    per_fold: dict[float, list[float]] = {eps: [] for eps in candidates}
    skipped: set[float] = set()

    for held_out in range(folds):
        train = CrossRelationSystem(
            [seg.recordings for i, seg in enumerate(segments) if i != held_out],
            cfg.channel_len,
            dense_threshold=cfg.dense_threshold,
        )
        test = CrossRelationSystem([segments[held_out].recordings], cfg.channel_len, dense_threshold=0)

        slack = initial_slack(train, cfg) if solver is SolverId.IL1C else None
        tong = None if solver is SolverId.IL1C else tong_vector(train)[0]

        for eps in candidates:
            if eps in skipped:
                continue
            try:
                if slack is not None:
                    h = _solve_il1c(train, cfg, obs.sample_rate, epsilon=eps, slack=slack).airs.stacked()
                else:
                    outcome, _ = _solve_anchor(
                        train, cfg, nonneg=solver is SolverId.NN_ANCHOR_L1, epsilon=eps, tong=tong
                    )
                    h = outcome.x
            except (InfeasibleConstraints, EstimationFailure) as exc:
                log.info(f'Skipping epsilon {eps:g}: {exc}')
                skipped.add(eps)
                continue
            per_fold[eps].append(test.residual(h / np.linalg.norm(h)))

    scores = {eps: float(np.mean(values)) for eps, values in per_fold.items() if eps not in skipped}
    if not scores:
        raise InfeasibleConstraints(f'no epsilon in {candidates} is feasible on every fold')

    best = candidates[0]
    best_score = float('inf')
    for eps in candidates:
        if eps in scores and scores[eps] < best_score:
            best, best_score = eps, scores[eps]

    log.debug(f'Cross-validated epsilon {best:g} (scores {scores})')
    return EpsilonSelection(best, scores, tuple(sorted(skipped)))
