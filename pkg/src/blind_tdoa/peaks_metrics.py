from __future__ import annotations

__all__ = (
    'compute_metrics',
    'estimate_tdoas',
    'find_peaks',
    'match_peaks',
    'metrics_from_totals',
    'score_estimate',
    'subspace_error',
    'trial_totals',
)

import logging
from typing import TYPE_CHECKING

import numpy as np
from scipy import signal
from scipy.optimize import linear_sum_assignment

from blind_tdoa.constants import DEFAULT_MAX_PEAKS, DEFAULT_REL_FLOOR, DIRECT_PATH_DB, MATCH_THRESHOLD
from blind_tdoa.errors import EstimationFailure, InvalidArgument
from blind_tdoa.models import MatchedPair, MatchReport, MetricPair, PeakList
from blind_tdoa.room_sim import truth_peaks

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from blind_tdoa.models import AirSet


log = logging.getLogger(__name__)


def find_peaks(
    channel: NDArray[np.float64],
    max_peaks: int = DEFAULT_MAX_PEAKS,
    rel_floor: float = DEFAULT_REL_FLOOR,
) -> PeakList:
    """Strict local maxima of at least ``rel_floor`` times the channel maximum.

    A flat top counts once, at its leftmost sample, and samples beyond
    either end count as lower than everything. The ``max_peaks`` tallest
    survive and are returned in position order.
    """

    if max_peaks < 1:
        raise InvalidArgument(f'max_peaks must be >= 1, got {max_peaks}')
    if not 0 <= rel_floor < 1:
        raise InvalidArgument(f'rel_floor must lie in [0, 1), got {rel_floor}')

    x = np.asarray(channel, dtype=np.float64)
    if x.size == 0:
        return PeakList.empty()
    top = float(x.max())
    if top <= 0:
        return PeakList.empty()

    edge = float(x.min()) - 1.0
    padded = np.r_[edge, x, edge]
    height = max(rel_floor * top, np.finfo(np.float64).tiny)
    _, props = signal.find_peaks(padded, height=height, plateau_size=1)

    positions = props['left_edges'] - 1
    amplitudes = x[positions]
    if positions.size > max_peaks:
        keep = np.argsort(-amplitudes, kind='stable')[:max_peaks]
        keep.sort()
        positions, amplitudes = positions[keep], amplitudes[keep]
    return PeakList(positions, amplitudes)


def match_peaks(truth: PeakList, estimate: PeakList, threshold: int = MATCH_THRESHOLD) -> MatchReport:
    """One-to-one matching of estimated to true peaks no further than ``threshold`` samples apart.

    Among all matchings with the most pairs, the one with the smallest
    total offset is returned.
    """

    if threshold < 0:
        raise InvalidArgument(f'matching threshold must be >= 0, got {threshold}')
    if len(truth) == 0 or len(estimate) == 0:
        return MatchReport((), len(truth), threshold)

    t_pos, e_pos = truth.positions, estimate.positions
    offsets = np.abs(t_pos[:, None] - e_pos[None, :])
    allowed = offsets <= threshold
    # Each extra match outweighs any saving in total offset
    bonus = threshold * min(len(truth), len(estimate)) + 1
    cost = np.where(allowed, offsets - bonus, 0)

    rows, cols = linear_sum_assignment(cost)
    pairs = tuple(
        MatchedPair(int(t_pos[r]), int(e_pos[c]), int(offsets[r, c]))
        for r, c in zip(rows, cols, strict=True)
        if allowed[r, c]
    )
    pairs = tuple(sorted(pairs))
    return MatchReport(pairs, len(truth) - len(pairs), threshold)


def trial_totals(reports: Sequence[MatchReport]) -> tuple[int, int, int]:
    """Matched count, summed offset and true-peak count pooled over the channels of one trial."""

    matched = sum(r.n_matched for r in reports)
    offsets = sum(r.offset_sum for r in reports)
    truth = sum(r.truth_count for r in reports)
    return matched, offsets, truth


def metrics_from_totals(totals: Sequence[tuple[int, int, int]]) -> MetricPair:
    """A_PPM and A_PUP from per-trial ``(matched, offset_sum, truth_count)`` totals.

    A trial without matches adds 0 to A_PPM and 1 to A_PUP.
    """

    if not totals:
        raise InvalidArgument('need at least one trial to compute metrics')

    ppm = 0.0
    pup = 0.0
    for matched, offsets, truth in totals:
        if truth < 1:
            raise InvalidArgument('trial has no ground-truth peaks')
        if matched > truth:
            raise InvalidArgument(f'{matched} matched peaks exceed the {truth} ground-truth peaks of a trial')
        if matched:
            ppm += offsets / matched
        pup += (truth - matched) / truth

    z = len(totals)
    return MetricPair(a_ppm=ppm / z, a_pup=pup / z)


def compute_metrics(
    match_reports: Sequence[Sequence[MatchReport]],
    truth_peak_count: int | None = None,
) -> MetricPair:
    """A_PPM and A_PUP over Z trials, pooling the channels of each trial.

    When ``truth_peak_count`` is ``None`` it is taken per trial from the reports.
    """

    if truth_peak_count is not None and truth_peak_count < 1:
        raise InvalidArgument(f'truth peak count must be >= 1, got {truth_peak_count}')

    totals = []
    for trial in match_reports:
        matched, offsets, truth = trial_totals(trial)
        totals.append((matched, offsets, truth_peak_count if truth_peak_count is not None else truth))
    return metrics_from_totals(totals)


def score_estimate(
    truth: AirSet,
    estimate: AirSet,
    *,
    threshold: int = MATCH_THRESHOLD,
    max_peaks: int = DEFAULT_MAX_PEAKS,
    rel_floor: float = DEFAULT_REL_FLOOR,
) -> list[MatchReport]:
    """Per-channel match reports of an estimate against ground-truth AIRs."""

    if truth.n_mics != estimate.n_mics:
        raise InvalidArgument(f'{estimate.n_mics} estimated channels for {truth.n_mics} true ones')

    reports: list[MatchReport] = []
    for n, est_channel in enumerate(estimate.channels):
        found = find_peaks(est_channel, max_peaks, rel_floor)
        reports.append(match_peaks(truth_peaks(truth, n), found, threshold))
    return reports


def estimate_tdoas(
    airs: AirSet,
    max_peaks: int = DEFAULT_MAX_PEAKS,
    *,
    rel_floor: float = DEFAULT_REL_FLOOR,
) -> NDArray[np.float64]:
    """Pairwise direct-path delay differences in samples.

    The direct path of a channel is its earliest peak within 6 dB of its
    tallest one. Pairs involving a channel without peaks are NaN.
    """

    direct = np.full(airs.n_mics, np.nan)
    ratio = 10.0 ** (-DIRECT_PATH_DB / 20.0)
    for n, channel in enumerate(airs.channels):
        peaks = find_peaks(channel, max_peaks, rel_floor)
        if len(peaks) == 0:
            log.warning(f'Channel {n} has no peaks; its TDOAs are undefined')
            continue
        strong = peaks.amplitudes >= ratio * peaks.amplitudes.max()
        direct[n] = peaks.positions[np.argmax(strong)]

    if np.all(np.isnan(direct)):
        raise EstimationFailure('no channel yields a peak, TDOAs cannot be estimated')
    return direct[:, None] - direct[None, :]


def subspace_error(truth: AirSet, estimate: AirSet) -> float:
    """Distance between the unit-norm stacked channel vectors, up to a global sign."""

    if truth.channels.shape != estimate.channels.shape:
        raise InvalidArgument(f'cannot compare AIRs of shape {estimate.channels.shape} to {truth.channels.shape}')
    t = truth.stacked() / np.linalg.norm(truth.stacked())
    e = estimate.stacked() / np.linalg.norm(estimate.stacked())
    return float(min(np.linalg.norm(t - e), np.linalg.norm(t + e)))
