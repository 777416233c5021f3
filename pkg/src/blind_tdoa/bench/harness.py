from __future__ import annotations

__all__ = (
    'TrialTask',
    'aggregate_cell',
    'build_improvements',
    'compare_solvers',
    'delta_avg',
    'delta_oracle',
    'reference_cells',
    'run_experiment',
    'run_trial',
    'sub_seeds',
    'trial_scores',
    'trial_seed',
)

import hashlib
import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from blind_tdoa import __version__
from blind_tdoa.constants import FAILED_TRIAL_LIMIT
from blind_tdoa.errors import BlindTdoaError, EstimationFailure, InvalidArgument, UndefinedRelativeImprovement
from blind_tdoa.models import (
    METRICS,
    CellResult,
    ExperimentConfig,
    ExperimentReport,
    Improvement,
    MetricName,
    NoiseSpec,
    SolverComparison,
    SolverComparisonRow,
    SolverId,
    StrategyConfig,
    TrialRow,
)
from blind_tdoa.peaks_metrics import estimate_tdoas, metrics_from_totals, score_estimate, trial_totals
from blind_tdoa.room_sim import ground_truth_tdoas, image_method_air, random_geometry, synthesize_observations
from blind_tdoa.signal_gen import inject_noise, make_source
from blind_tdoa.strategies import run_solver
from blind_tdoa.utils.formats import plural
from blind_tdoa.utils.pool import map_in_process_pool

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

log = logging.getLogger(__name__)

SEED_BITS = 63


class TrialTask(NamedTuple):
    cfg: ExperimentConfig
    solver: SolverId
    signal: str
    s: float
    n_mics: int
    trial: int


def trial_seed(master_seed: int, signal: str, s: float, n_mics: int, trial: int) -> int:
    """Stable 63-bit seed for one trial, independent of run order and interpreter."""

    key = f'{master_seed}|{signal}|{s!r}|{n_mics}|{trial}'.encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, 'little') >> (64 - SEED_BITS)


def sub_seeds(seed: int) -> tuple[int, int, int, int]:
    # geometry, source, noise, microphone order
    geometry, source, noise, order = (int(v) for v in np.random.SeedSequence(seed).generate_state(4))
    return geometry, source, noise, order


def _tdoa_error(truth: NDArray[np.float64], estimate: NDArray[np.float64]) -> float | None:
    off_diagonal = ~np.eye(truth.shape[0], dtype=bool) & np.isfinite(estimate)
    if not off_diagonal.any():
        return None
    return float(np.abs(estimate - truth)[off_diagonal].mean())


def run_trial(task: TrialTask) -> TrialRow:
    """Simulate, solve and score one trial; domain errors become a failed row."""

    cfg, solver, signal, s, n_mics, trial = task
    seed = trial_seed(cfg.master_seed, signal, s, n_mics, trial)
    row = {'signal': signal, 's': s, 'n_mics': n_mics, 'trial': trial, 'seed': seed}
    geometry_seed, source_seed, noise_seed, order_seed = sub_seeds(seed)

    try:
        geom = random_geometry(cfg.room, n_mics, geometry_seed)
        air = image_method_air(cfg.room, geom, cfg.solver_cfg.channel_len)
        source = make_source(signal, cfg.signal_length, source_seed, sample_rate=cfg.room.sample_rate)
        obs = inject_noise(synthesize_observations(air, source), NoiseSpec(s, noise_seed))

        strategy = StrategyConfig(
            base=cfg.solver_cfg,
            mic_order_seed=order_seed,
            pairing=cfg.pairing,
            candidate_norm=cfg.candidate_norm,
        )
        result = run_solver(obs, solver, strategy, auto_epsilon=cfg.cross_validate)
        reports = score_estimate(air, result.airs, threshold=cfg.match_threshold)
    except BlindTdoaError as exc:
        log.warning(f'Trial {trial} of {signal} s={s} N={n_mics} failed: {exc.code}: {exc}')
        return TrialRow(**row, ok=False, error=f'{exc.code}: {exc}')

    matched, offsets, truth = trial_totals(reports)
    try:
        tdoa_error = _tdoa_error(ground_truth_tdoas(air).astype(np.float64), estimate_tdoas(result.airs))
    except EstimationFailure:
        tdoa_error = None

    return TrialRow(
        **row,
        ok=True,
        epsilon=result.epsilon,
        truth_peaks=truth,
        matched=matched,
        offset_sum=offsets,
        tdoa_error=tdoa_error,
    )


def trial_scores(row: TrialRow) -> tuple[float, float]:
    """Per-trial (PPM, PUP) contribution of a successful row."""

    metrics = metrics_from_totals([(row.matched, row.offset_sum, row.truth_peaks)])
    return metrics.a_ppm, metrics.a_pup


def aggregate_cell(rows: Sequence[TrialRow]) -> CellResult:
    """Fold the trials of one (signal, s, N) cell.

    Failed trials are excluded from the averages and counted; a cell with
    more than 20% failures is invalid and carries no metrics.
    """

    first = rows[0]
    ok = [r for r in rows if r.ok]
    n_failed = len(rows) - len(ok)
    valid = bool(ok) and n_failed <= FAILED_TRIAL_LIMIT * len(rows)
    metrics = metrics_from_totals([(r.matched, r.offset_sum, r.truth_peaks) for r in ok]) if valid else None
    return CellResult(
        signal=first.signal,
        s=first.s,
        n_mics=first.n_mics,
        n_trials=len(rows),
        n_failed=n_failed,
        valid=valid,
        metrics=metrics,
    )


def reference_cells(cells: Sequence[CellResult], signal: str, s: float) -> list[CellResult]:
    return sorted((c for c in cells if c.signal == signal and c.s == s), key=lambda c: c.n_mics)


def _baseline_and_rest(cells: Sequence[CellResult], metric: MetricName) -> tuple[float, list[tuple[int, float]]]:
    values = {c.n_mics: getattr(c.metrics, metric) for c in cells if c.valid and c.metrics is not None}
    if 2 not in values:
        raise InvalidArgument('no valid N=2 baseline cell')
    rest = sorted((n, v) for n, v in values.items() if n > 2)
    if not rest:
        raise InvalidArgument('no valid cell with more than 2 microphones')
    return values[2], rest


def delta_avg(cells: Sequence[CellResult], metric: MetricName) -> float:
    """Mean of ``metric(N=2) - metric(N)`` over the N > 2 cells; positive means improvement."""

    base, rest = _baseline_and_rest(cells, metric)
    return math.fsum(base - value for _, value in rest) / len(rest)


def delta_oracle(cells: Sequence[CellResult], metric: MetricName) -> tuple[float, int]:
    """Relative gain in percent of the best N > 2 over N = 2, and that N.

    Ties go to the smaller N. The percentage is not clamped, so it is
    negative when every larger array is worse.
    """

    base, rest = _baseline_and_rest(cells, metric)
    best_n, best = rest[0]
    for n, value in rest[1:]:
        if value < best:
            best_n, best = n, value
    if base == 0:
        raise UndefinedRelativeImprovement(f'{metric} is 0 at N=2, a relative improvement is undefined')
    return 100.0 * (base - best) / base, best_n


def build_improvements(cfg: ExperimentConfig, cells: Sequence[CellResult]) -> list[Improvement]:
    improvements: list[Improvement] = []
    for signal in cfg.signals:
        chosen = reference_cells(cells, signal, cfg.reference_s)
        for metric in METRICS:
            entry: dict[str, object] = {'signal': signal, 'metric': metric, 'reference_s': cfg.reference_s}
            try:
                entry['delta_avg'] = delta_avg(chosen, metric)
                entry['delta_oracle'], entry['oracle_n'] = delta_oracle(chosen, metric)
            except BlindTdoaError as exc:
                entry['note'] = f'{exc.code}: {exc}'
            improvements.append(Improvement.model_validate(entry))
    return improvements


def _tasks(cfg: ExperimentConfig, solver: SolverId) -> list[TrialTask]:
    return [
        TrialTask(cfg, solver, signal, s, n_mics, trial)
        for signal in cfg.signals
        for s in cfg.s_values
        for n_mics in cfg.n_mics_values
        for trial in range(cfg.z_trials)
    ]


def _cells(cfg: ExperimentConfig, rows: Sequence[TrialRow]) -> list[CellResult]:
    # rows arrive in (signal, s, N, trial) order
    z = cfg.z_trials
    cells = [aggregate_cell(rows[i : i + z]) for i in range(0, len(rows), z)]
    for cell in cells:
        failed = f'{plural(cell.n_failed):failed trial}'
        if not cell.valid:
            log.warning(f'Cell {cell.signal} s={cell.s} N={cell.n_mics} is invalid ({failed} of {z})')
        elif cell.metrics is not None:
            log.info(
                f'Cell {cell.signal} s={cell.s} N={cell.n_mics}: A_PPM {cell.metrics.a_ppm:.4f}, '
                f'A_PUP {cell.metrics.a_pup:.4f} ({failed})'
            )
    return cells


def run_experiment(cfg: ExperimentConfig, *, jobs: int = 1) -> ExperimentReport:
    """Run every (signal, s, N, trial) of the sweep and aggregate the cells.

    The report depends only on ``cfg``: trial seeds derive from the cell
    coordinates and ``master_seed``, and the fold follows task order
    whatever ``jobs`` is.
    """

    tasks = _tasks(cfg, cfg.solver)
    log.info(f'Running {plural(len(tasks)):trial} of {cfg.solver} with {plural(jobs):worker}')
    rows = map_in_process_pool(run_trial, tasks, jobs=jobs)
    cells = _cells(cfg, rows)
    improvements = build_improvements(cfg, cells) if cfg.improvements else []
    return ExperimentReport(config=cfg, version=__version__, cells=cells, trials=rows, improvements=improvements)


def _wins(challenger: Sequence[TrialRow], baseline: Sequence[TrialRow]) -> float | None:
    paired = [(c, b) for c, b in zip(challenger, baseline, strict=True) if c.ok and b.ok]
    if not paired:
        return None
    wins = 0
    for c, b in paired:
        c_ppm, c_pup = trial_scores(c)
        b_ppm, b_pup = trial_scores(b)
        wins += c_ppm <= b_ppm and c_pup <= b_pup
    return wins / len(paired)


def compare_solvers(
    cfg: ExperimentConfig,
    solver_ids: Sequence[SolverId],
    *,
    jobs: int = 1,
) -> list[SolverComparison]:
    """Score several solvers on identical trials, one comparison per signal.

    The first solver is the baseline of the win fractions: for every other
    solver, the share of trials solved by both where it did no worse on
    both metrics.
    """

    if len(solver_ids) < 2:
        raise InvalidArgument('need at least two solvers to compare')

    by_solver: dict[SolverId, list[TrialRow]] = {}
    for solver in solver_ids:
        log.info(f'Comparing: running {solver}')
        by_solver[solver] = map_in_process_pool(run_trial, _tasks(cfg, solver), jobs=jobs)

    baseline = solver_ids[0]
    comparisons: list[SolverComparison] = []
    for signal in cfg.signals:
        rows: list[SolverComparisonRow] = []
        for s in cfg.s_values:
            for n_mics in cfg.n_mics_values:
                for solver in solver_ids:
                    cell = aggregate_cell(
                        [r for r in by_solver[solver] if r.signal == signal and r.s == s and r.n_mics == n_mics]
                    )
                    rows.append(
                        SolverComparisonRow(
                            solver=solver, s=s, n_mics=n_mics, metrics=cell.metrics, n_failed=cell.n_failed
                        )
                    )

        base_rows = [r for r in by_solver[baseline] if r.signal == signal]
        win_fractions: dict[str, float] = {}
        for solver in solver_ids[1:]:
            fraction = _wins([r for r in by_solver[solver] if r.signal == signal], base_rows)
            if fraction is not None:
                win_fractions[f'{solver}/{baseline}'] = fraction
        comparisons.append(SolverComparison(signal=signal, rows=rows, win_fractions=win_fractions))
    return comparisons
