from __future__ import annotations

__all__ = ('largest_eigenvalue', 'minimize_quadratic')

import logging
import math
from typing import TYPE_CHECKING

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from blind_tdoa.errors import NumericalFailure
from blind_tdoa.models import QpOutcome

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from blind_tdoa.solvers.projections import ConstraintSet


log = logging.getLogger(__name__)

KKT_CHECK_EVERY = 10
POLISH_EVERY = 50
POLISH_FEASIBILITY_TOL = 1e-10


type NormalMatrix = NDArray[np.float64] | LinearOperator


def largest_eigenvalue(q: NormalMatrix) -> float:
    size = q.shape[0]
    try:
        if isinstance(q, LinearOperator):
            value = eigsh(q, k=1, which='LA', return_eigenvectors=False)[0]
        else:
            value = linalg.eigvalsh(q, subset_by_index=[size - 1, size - 1])[0]
    except (linalg.LinAlgError, ArpackNoConvergence) as exc:
        raise NumericalFailure(f'largest eigenvalue of the normal matrix did not converge: {exc}') from exc
    return float(value)


def _objective(q: NormalMatrix, x: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
    qx = q @ x
    return float(x @ qx), qx


def _kkt_residual(
    x: NDArray[np.float64],
    qx: NDArray[np.float64],
    step: float,
    feasible: ConstraintSet,
) -> float:
    """Relative size of the projected-gradient step at ``x``; zero exactly at a minimizer."""

    moved = feasible.project(x - step * 2.0 * qx)
    return float(np.linalg.norm(x - moved) / max(np.linalg.norm(x), np.finfo(np.float64).tiny))


def _polish(
    q: NDArray[np.float64],
    x: NDArray[np.float64],
    feasible: ConstraintSet,
) -> NDArray[np.float64] | None:
    # Solve the equality-constrained QP on the detected support
    scale = np.abs(x).max()
    support = np.flatnonzero(np.abs(x) > 1e-12 * scale)
    a_eq, b_eq = feasible.active_equalities(x)
    a_s = a_eq[:, support]

    k, m = support.size, a_s.shape[0]
    kkt = np.zeros((k + m, k + m))
    kkt[:k, :k] = 2.0 * q[np.ix_(support, support)]
    kkt[:k, k:] = a_s.T
    kkt[k:, :k] = a_s
    rhs = np.r_[np.zeros(k), b_eq]
    try:
        solution = linalg.lstsq(kkt, rhs)[0]
    except (linalg.LinAlgError, ValueError):
        return None

    candidate = np.zeros_like(x)
    candidate[support] = solution[:k]
    if max(feasible.violations(candidate).values()) > POLISH_FEASIBILITY_TOL:
        return None
    return candidate


def _try_polish(
    q: NDArray[np.float64],
    x: NDArray[np.float64],
    f_x: float,
    residual: float,
    step: float,
    feasible: ConstraintSet,
    tol: float,
) -> tuple[NDArray[np.float64], float, float] | None:
    """Active-set candidate that is feasible, no worse than ``x`` and at least as stationary."""

    candidate = _polish(q, x, feasible)
    if candidate is None:
        return None
    f_cand, q_cand = _objective(q, candidate)
    if f_cand > f_x * (1 + 1e-12) + 1e-300:
        return None
    cand_residual = _kkt_residual(candidate, q_cand, step, feasible)
    if cand_residual > max(residual, tol):
        return None
    return candidate, f_cand, cand_residual


def minimize_quadratic(
    q: NormalMatrix,
    feasible: ConstraintSet,
    start: NDArray[np.float64],
    *,
    tol: float,
    max_iter: int,
    lipschitz: float | None = None,
    polish: bool = True,
) -> QpOutcome:
    """Minimize ``x^T Q x`` over a convex set with accelerated projected gradient.

    Momentum is reset whenever it points against the last step, and the
    best iterate seen (the projected start included) is returned, so the
    result never scores worse than the start. With a dense ``Q`` the
    iterate is periodically refined by an active-set solve on its support,
    kept only if it is feasible and no worse; once that solve is
    stationary the search stops early.

    Parameters
    ----------
    q:
        Symmetric PSD matrix, dense or as a ``LinearOperator``.
    feasible:
        The constraint set, which must supply an exact projection.
    start:
        Any vector; it is projected first.
    tol:
        Stop once the relative projected-gradient step is below this.
    max_iter:
        Iteration cap.
    lipschitz:
        Largest eigenvalue of ``Q`` when already known.
    """

    lam_max = largest_eigenvalue(q) if lipschitz is None else lipschitz
    step = 1.0 / (2.0 * max(lam_max, np.finfo(np.float64).tiny) * (1.0 + 1e-9))
    dense = None if isinstance(q, LinearOperator) else q

    x = feasible.project(np.asarray(start, dtype=np.float64).reshape(-1))
    f_x, qx = _objective(q, x)
    y, qy = x, qx
    t = 1.0

    best_x, best_f, best_qx = x, f_x, qx
    residual = _kkt_residual(x, qx, step, feasible)
    converged = residual <= tol
    polished = False
    iterations = 0

    while not converged and iterations < max_iter:
        iterations += 1
        x_new = feasible.project(y - step * 2.0 * qy)
        f_new, qx_new = _objective(q, x_new)
        if not math.isfinite(f_new):
            raise NumericalFailure(f'inner QP diverged at iteration {iterations}')

        if f_new < best_f:
            best_x, best_f, best_qx = x_new, f_new, qx_new

        if np.dot(y - x_new, x_new - x) > 0:
            # Restart: momentum is pushing uphill
            t = 1.0
            y, qy = x_new, qx_new
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_next
            y = x_new + beta * (x_new - x)
            qy = (1.0 + beta) * qx_new - beta * qx
            t = t_next
        x, qx = x_new, qx_new

        if iterations % KKT_CHECK_EVERY == 0:
            residual = _kkt_residual(best_x, best_qx, step, feasible)
            converged = residual <= tol
            if not converged and polish and dense is not None and iterations % POLISH_EVERY == 0:
                refined = _try_polish(dense, best_x, best_f, residual, step, feasible, tol)
                if refined is not None and refined[2] <= tol:
                    best_x, best_f, residual = refined
                    best_qx = dense @ best_x
                    polished = converged = True

    if not polished:
        residual = _kkt_residual(best_x, best_qx, step, feasible)
        converged = residual <= tol
        if polish and dense is not None:
            refined = _try_polish(dense, best_x, best_f, residual, step, feasible, tol)
            if refined is not None:
                best_x, best_f, residual = refined
                polished = True
                converged = residual <= tol

    log.debug(
        f'Inner QP finished after {iterations} iterations: objective {best_f:.6e}, '
        f'KKT residual {residual:.2e}{" (polished)" if polished else ""}'
    )
    return QpOutcome(best_x, max(best_f, 0.0), iterations, residual, converged, polished)
