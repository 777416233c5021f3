from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

from blind_tdoa.errors import EstimationFailure
from blind_tdoa.models import CandidateNorm, Il1cInit, Pairing, SolverConfig, SolverId, StrategyConfig
from blind_tdoa.peaks_metrics import compute_metrics, estimate_tdoas, score_estimate, subspace_error
from blind_tdoa.settings import settings
from blind_tdoa.strategies import run_solver
from blind_tdoa.utils.config_text import build_model, load_config_file
from blind_tdoa.utils.formats import format_constraint_report, format_delay_matrix
from blind_tdoa.utils.serialization import read_airs, read_observations, write_delay_matrix_csv, write_solver_result

from .common import AUTO, HelpFormatter, draw_seed, epsilon_value, output_dir

if TYPE_CHECKING:
    import argparse


log = logging.getLogger(__name__)

# flag dest -> SolverConfig field
SOLVER_FLAGS = (
    'channel_len',
    'anchor_index',
    'max_outer_iters',
    'max_inner_iters',
    'tol_inner',
    'tol_outer',
    'il1c_init',
    'cv_folds',
)


def solver_config(args: argparse.Namespace) -> SolverConfig:
    """SolverConfig from ``--config`` with explicit flags layered on top."""

    data: dict[str, Any] = load_config_file(args.config) if args.config else {}
    data.update({key: getattr(args, key) for key in SOLVER_FLAGS if getattr(args, key) is not None})
    if isinstance(args.epsilon, float):
        data['epsilon'] = args.epsilon
    elif args.epsilon == AUTO:
        data.pop('epsilon', None)
    if 'channel_len' not in data:
        args.parser.error('--channel-len is required unless the --config file sets channel_len')
    return build_model(SolverConfig, data)


def run(args: argparse.Namespace) -> None:
    out = output_dir(args)
    cfg = solver_config(args)
    obs = read_observations(args.input)
    strategy = StrategyConfig(
        base=cfg,
        mic_order_seed=draw_seed(args.seed),
        pairing=Pairing(args.pairing),
        candidate_norm=CandidateNorm(args.candidate_norm),
    )

    result = run_solver(obs, SolverId(args.solver), strategy, auto_epsilon=args.epsilon == AUTO, jobs=args.jobs)
    write_solver_result(result, out)

    status = 'converged' if result.converged else 'stopped at the iteration cap'
    epsilon = '' if result.epsilon is None else f', epsilon {result.epsilon:.6g}'
    print(f'{result.solver}: {status} after {result.outer_iters} outer iterations{epsilon}')
    print(f'final objective {result.objective_trace[-1]:.6e}')
    print(format_constraint_report(result.constraint_report))

    try:
        tdoas = estimate_tdoas(result.airs)
    except EstimationFailure as exc:
        log.warning(f'No TDOAs: {exc}')
    else:
        write_delay_matrix_csv(tdoas, out / 'tdoa.csv')
        print('Estimated TDOAs (samples):')
        print(format_delay_matrix(tdoas))

    if args.truth:
        truth = read_airs(args.truth)
        metrics = compute_metrics([score_estimate(truth, result.airs)])
        print(f'subspace error: {subspace_error(truth, result.airs):.3e}')
        print(f'A_PPM {metrics.a_ppm:.4f}  A_PUP {metrics.a_pup:.4f}')


def setup(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        'solve',
        help='estimate AIRs from recordings',
        description='Run one blind identification solver or strategy on an observation file.',
        formatter_class=HelpFormatter,
    )
    parser.add_argument('--in', dest='input', type=Path, required=True, help='observations file or directory')
    parser.add_argument('--solver', choices=[str(s) for s in SolverId], default=str(SolverId.IL1C))
    parser.add_argument('--config', type=Path, help='key = value file with SolverConfig fields')
    parser.add_argument('--channel-len', type=int, help='AIR length L to estimate')
    parser.add_argument(
        '--epsilon',
        type=epsilon_value,
        help='L1 budget, or "auto" to cross-validate it (default: twice the initializer mass)',
    )
    parser.add_argument('--anchor-index', type=int, help='anchored tap (default: largest tap of the eigenvector)')
    parser.add_argument('--max-outer-iters', type=int, help='alternations (default: 20)')
    parser.add_argument('--max-inner-iters', type=int, help='inner QP iterations (default: 5000)')
    parser.add_argument('--tol-inner', type=float, help='inner QP tolerance (default: 1e-6)')
    parser.add_argument('--tol-outer', type=float, help='relative change that stops the alternation (default: 1e-4)')
    parser.add_argument('--il1c-init', choices=[str(i) for i in Il1cInit], help='slack initializer (default: tong)')
    parser.add_argument('--cv-folds', type=int, help='cross-validation segments (default: 3)')
    parser.add_argument('--pairing', choices=[str(p) for p in Pairing], default=str(Pairing.ALL_PAIRS))
    parser.add_argument(
        '--candidate-norm', choices=[str(c) for c in CandidateNorm], default=str(CandidateNorm.MAX_TAP)
    )
    parser.add_argument('--seed', type=int, help='microphone order seed (default: fresh entropy, logged)')
    parser.add_argument('--jobs', type=int, default=settings.jobs, help='worker processes for ensemble pairs')
    parser.add_argument('--truth', type=Path, help='ground-truth AIR file to score the estimate against')
    parser.add_argument('--out', type=Path, help='output directory (default: $BLIND_TDOA_OUTPUT_DIR)')
    parser.set_defaults(handler=run, parser=parser)
