from __future__ import annotations

__all__ = (
    'AnchorSet',
    'ConstraintSet',
    'SlackSet',
    'project_capped_simplex',
    'project_l1_ball',
    'project_simplex',
)

import logging
from typing import TYPE_CHECKING, Protocol

import numpy as np

from blind_tdoa.errors import InfeasibleConstraints, InvalidArgument, NumericalFailure

if TYPE_CHECKING:
    from numpy.typing import NDArray


log = logging.getLogger(__name__)

# Relative slack when deciding whether the L1 budget is active
BUDGET_ACTIVE_RTOL = 1e-9
MAX_BRACKET_DOUBLINGS = 200
MAX_SECANT_STEPS = 200


class ConstraintSet(Protocol):
    """Closed convex set the inner QP is solved over."""

    def project(self, v: NDArray[np.float64]) -> NDArray[np.float64]: ...

    def violations(self, x: NDArray[np.float64]) -> dict[str, float]: ...

    def active_equalities(self, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]: ...


def project_simplex(v: NDArray[np.float64], radius: float) -> NDArray[np.float64]:
    """Euclidean projection onto ``{x >= 0, sum(x) = radius}`` (sort based)."""

    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_capped_simplex(v: NDArray[np.float64], radius: float) -> NDArray[np.float64]:
    """Projection onto ``{x >= 0, sum(x) <= radius}``."""

    if radius <= 0:
        return np.zeros_like(v)
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= radius:
        return clipped
    return project_simplex(v, radius)


def project_l1_ball(v: NDArray[np.float64], radius: float) -> NDArray[np.float64]:
    """Projection onto ``{x : |x|_1 <= radius}``."""

    if radius <= 0:
        return np.zeros_like(v)
    if np.abs(v).sum() <= radius:
        return v.copy()
    return np.sign(v) * project_simplex(np.abs(v), radius)


class AnchorSet:
    """``{x : x[anchor] = 1, |x|_1 <= epsilon}``, optionally with ``x >= 0``.

    The set is a product of the fixed anchor tap and an L1 ball (or capped
    simplex) of radius ``epsilon - 1`` over the remaining taps, so the
    projection is exact.
    """

    def __init__(self, size: int, anchor: int, epsilon: float, *, nonneg: bool = False) -> None:
        if not 0 <= anchor < size:
            raise InvalidArgument(f'anchor index {anchor} outside a vector of {size} taps')
        if epsilon < 1:
            raise InfeasibleConstraints(
                f'epsilon {epsilon:g} is below 1, the L1 mass of the anchor tap alone'
            )
        self.size: int = size
        self.anchor: int = anchor
        self.epsilon: float = epsilon
        self.nonneg: bool = nonneg
        self._rest: NDArray[np.bool_] = np.ones(size, dtype=bool)
        self._rest[anchor] = False

    def project(self, v: NDArray[np.float64]) -> NDArray[np.float64]:
        x = np.empty_like(v)
        radius = self.epsilon - 1.0
        if self.nonneg:
            x[self._rest] = project_capped_simplex(v[self._rest], radius)
        else:
            x[self._rest] = project_l1_ball(v[self._rest], radius)
        x[self.anchor] = 1.0
        return x

    def violations(self, x: NDArray[np.float64]) -> dict[str, float]:
        report = {
            'anchor': abs(float(x[self.anchor]) - 1.0),
            'l1_budget': max(float(np.abs(x).sum()) - self.epsilon, 0.0),
        }
        if self.nonneg:
            report['nonnegativity'] = max(-float(x.min()), 0.0)
        return report

    def active_equalities(self, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        rows = [np.eye(1, self.size, self.anchor).ravel()]
        rhs = [1.0]
        if np.abs(x).sum() >= self.epsilon * (1 - BUDGET_ACTIVE_RTOL):
            rows.append(np.sign(x))
            rhs.append(self.epsilon)
        return np.vstack(rows), np.asarray(rhs)


class SlackSet:
    """``{h >= 0, sum(h) <= epsilon, p_n . h_n = 1 for every channel n}``.

    Projection solves the KKT conditions ``h = max(0, v - lam + mu_n p_n)``:
    for a fixed budget multiplier ``lam`` every ``mu_n`` comes from a
    breakpoint search, and ``lam`` itself is found by a bracketed
    secant search on the total mass, which does not increase with ``lam``.
    """

    def __init__(self, slack: NDArray[np.float64], epsilon: float) -> None:
        slack = np.asarray(slack, dtype=np.float64)
        if slack.ndim != 2 or np.any(slack < 0) or np.any(slack.max(axis=1) <= 0):
            raise InvalidArgument('slack vectors must be non-negative rows with a positive entry each')
        floor = float(np.sum(1.0 / slack.max(axis=1)))
        if epsilon < floor * (1 - 1e-12):
            raise InfeasibleConstraints(
                f'epsilon {epsilon:g} is below the feasibility floor {floor:g} of the slack vectors'
            )
        self.slack: NDArray[np.float64] = slack
        self.epsilon: float = epsilon
        self.floor: float = floor
        self._positive: NDArray[np.bool_] = slack > 0

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.slack.shape[0]), int(self.slack.shape[1]))

    def _fit_channels(self, w: NDArray[np.float64]) -> NDArray[np.float64]:
        # Per channel, find mu with sum_k p_k * max(0, w_k + mu p_k) = 1
        p = self.slack
        breaks = np.full_like(w, np.inf)
        np.divide(-w, p, out=breaks, where=self._positive)

        order = np.argsort(breaks, axis=1, kind='stable')
        b_sorted = np.take_along_axis(breaks, order, axis=1)
        p_sorted = np.take_along_axis(p, order, axis=1)
        w_sorted = np.take_along_axis(w, order, axis=1)

        s1 = np.cumsum(p_sorted * w_sorted, axis=1)
        s2 = np.cumsum(p_sorted * p_sorted, axis=1)
        b_next = np.concatenate([b_sorted[:, 1:], np.full((w.shape[0], 1), np.inf)], axis=1)

        with np.errstate(invalid='ignore'):
            reached = s1 + b_next * s2 >= 1.0
        j = np.argmax(reached, axis=1)
        rows = np.arange(w.shape[0])
        mu = (1.0 - s1[rows, j]) / s2[rows, j]
        return np.maximum(w + mu[:, None] * p, 0.0)

    def _project_channels(self, v: NDArray[np.float64]) -> NDArray[np.float64]:
        h = self._fit_channels(v)
        if h.sum() <= self.epsilon:
            return h

        lo, f_lo = 0.0, float(h.sum()) - self.epsilon
        hi = max(1.0, float(np.abs(v).max()))
        for _ in range(MAX_BRACKET_DOUBLINGS):
            h_hi = self._fit_channels(v - hi)
            f_hi = float(h_hi.sum()) - self.epsilon
            if f_hi <= 0:
                break
            lo, f_lo = hi, f_hi
            hi *= 2.0
        else:
            raise NumericalFailure('could not bracket the L1 budget multiplier')

        # Illinois variant of regula falsi; the hi side always stays feasible
        tol = 1e-12 * self.epsilon
        side = 0
        for _ in range(MAX_SECANT_STEPS):
            if f_hi >= -tol or hi - lo <= 1e-15 * hi:
                break
            lam = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            if not lo < lam < hi:
                lam = 0.5 * (lo + hi)
            h_mid = self._fit_channels(v - lam)
            f_mid = float(h_mid.sum()) - self.epsilon
            if f_mid > 0:
                lo, f_lo = lam, f_mid
                if side == -1:
                    f_hi *= 0.5
                side = -1
            else:
                hi, f_hi, h_hi = lam, f_mid, h_mid
                if side == 1:
                    f_lo *= 0.5
                side = 1
        return h_hi

    def project(self, v: NDArray[np.float64]) -> NDArray[np.float64]:
        return self._project_channels(np.asarray(v, dtype=np.float64).reshape(self.shape)).reshape(-1)

    def violations(self, x: NDArray[np.float64]) -> dict[str, float]:
        h = np.asarray(x).reshape(self.shape)
        products = np.einsum('nk,nk->n', self.slack, h)
        return {
            'slack_equality': float(np.abs(products - 1.0).max()),
            'nonnegativity': max(-float(h.min()), 0.0),
            'l1_budget': max(float(h.sum()) - self.epsilon, 0.0),
        }

    def active_equalities(self, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        n, length = self.shape
        rows = np.zeros((n, n * length))
        for channel in range(n):
            rows[channel, channel * length : (channel + 1) * length] = self.slack[channel]
        rhs = np.ones(n)
        if np.sum(x) >= self.epsilon * (1 - BUDGET_ACTIVE_RTOL):
            rows = np.vstack([rows, np.ones(n * length)])
            rhs = np.r_[rhs, self.epsilon]
        return rows, rhs
