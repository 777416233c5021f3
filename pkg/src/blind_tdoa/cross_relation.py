from __future__ import annotations

__all__ = (
    'ConvMatrix',
    'CrossRelationSystem',
    'assemble_normal_matrix',
    'build_conv_matrix',
    'cross_residual',
)

import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import TYPE_CHECKING

import numpy as np
from scipy import fft, linalg, signal
from scipy.sparse.linalg import LinearOperator

from blind_tdoa.constants import DEFAULT_DENSE_THRESHOLD
from blind_tdoa.errors import InvalidArgument

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from blind_tdoa.models import AirSet, ObservationSet


log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ConvMatrix:
    """The (K + L - 1) x L Toeplitz matrix whose product with ``h`` is ``conv(y, h)``."""

    generator: NDArray[np.float64]
    channel_len: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.generator.size + self.channel_len - 1, self.channel_len)

    def matvec(self, h: NDArray[np.float64]) -> NDArray[np.float64]:
        return signal.convolve(self.generator, h)

    def rmatvec(self, r: NDArray[np.float64]) -> NDArray[np.float64]:
        return signal.correlate(r, self.generator, mode='valid')

    def to_dense(self) -> NDArray[np.float64]:
        first_col = np.r_[self.generator, np.zeros(self.channel_len - 1)]
        first_row = np.r_[self.generator[0], np.zeros(self.channel_len - 1)]
        return linalg.toeplitz(first_col, first_row)


def build_conv_matrix(y: NDArray[np.float64], channel_len: int) -> ConvMatrix:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise InvalidArgument(f'recording must be one-dimensional, got shape {y.shape}')
    if channel_len < 1:
        raise InvalidArgument(f'channel length must be >= 1, got {channel_len}')
    if channel_len > y.size:
        raise InvalidArgument(
            f'channel length {channel_len} exceeds recording length {y.size}; the system is underdetermined'
        )
    return ConvMatrix(y, channel_len)


class CrossRelationSystem:
    """Stacked cross-relation operator ``A`` over all microphone pairs.

    For every recording segment and every pair ``m < n`` the block row
    produces ``conv(y_n, h_m) - conv(y_m, h_n)``; ``h`` is the channel-major
    stack of the N impulse responses. Segments are independent pieces of
    the same recordings and their residuals add up.
    """

    def __init__(
        self,
        segments: Sequence[NDArray[np.float64]],
        channel_len: int,
        *,
        dense_threshold: int = DEFAULT_DENSE_THRESHOLD,
    ) -> None:
        if not segments:
            raise InvalidArgument('cross-relation system needs at least one recording segment')

        blocks = [np.asarray(seg, dtype=np.float64) for seg in segments]
        n_mics = blocks[0].shape[0]
        for seg in blocks:
            if seg.ndim != 2 or seg.shape[0] != n_mics:
                raise InvalidArgument(f'every segment must be ({n_mics}, K), got shape {seg.shape}')
            if seg.shape[1] < channel_len:
                raise InvalidArgument(
                    f'channel length {channel_len} exceeds segment length {seg.shape[1]}; the system is underdetermined'
                )
        if n_mics < 2:
            raise InvalidArgument(f'cross relations need at least 2 microphones, got {n_mics}')
        if channel_len < 1:
            raise InvalidArgument(f'channel length must be >= 1, got {channel_len}')

        self.segments: tuple[NDArray[np.float64], ...] = tuple(blocks)
        self.n_mics: int = n_mics
        self.channel_len: int = channel_len
        self.dense_threshold: int = dense_threshold
        self.pairs: tuple[tuple[int, int], ...] = tuple(combinations(range(n_mics), 2))

    @classmethod
    def from_observations(
        cls,
        obs: ObservationSet,
        channel_len: int,
        *,
        dense_threshold: int = DEFAULT_DENSE_THRESHOLD,
    ) -> CrossRelationSystem:
        return cls([obs.recordings], channel_len, dense_threshold=dense_threshold)

    @property
    def size(self) -> int:
        return self.n_mics * self.channel_len

    @property
    def is_dense(self) -> bool:
        return self.size <= self.dense_threshold

    @property
    def residual_len(self) -> int:
        per_pair = sum(seg.shape[1] + self.channel_len - 1 for seg in self.segments)
        return len(self.pairs) * per_pair

    def _unstack(self, h: NDArray[np.float64]) -> NDArray[np.float64]:
        h = np.asarray(h, dtype=np.float64)
        if h.size != self.size:
            raise InvalidArgument(f'expected a stacked vector of {self.size} taps, got {h.size}')
        return h.reshape(self.n_mics, self.channel_len)

    def apply(self, h: NDArray[np.float64]) -> NDArray[np.float64]:
        channels = self._unstack(h)
        parts = [
            signal.convolve(seg[n], channels[m]) - signal.convolve(seg[m], channels[n])
            for seg in self.segments
            for m, n in self.pairs
        ]
        return np.concatenate(parts)

    def adjoint(self, r: NDArray[np.float64]) -> NDArray[np.float64]:
        r = np.asarray(r, dtype=np.float64)
        if r.size != self.residual_len:
            raise InvalidArgument(f'expected a residual of length {self.residual_len}, got {r.size}')

        out = np.zeros((self.n_mics, self.channel_len))
        offset = 0
        for seg in self.segments:
            width = seg.shape[1] + self.channel_len - 1
            for m, n in self.pairs:
                piece = r[offset : offset + width]
                out[m] += signal.correlate(piece, seg[n], mode='valid')
                out[n] -= signal.correlate(piece, seg[m], mode='valid')
                offset += width
        return out.reshape(-1)

    def residual(self, h: NDArray[np.float64]) -> float:
        """Sum over segments and pairs of the squared cross-relation error."""

        if self.is_dense:
            h = np.asarray(h, dtype=np.float64).reshape(-1)
            return max(float(h @ self.gram @ h), 0.0)
        r = self.apply(h)
        return float(r @ r)

    def normal_matvec(self, h: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.is_dense:
            return self.gram @ np.asarray(h, dtype=np.float64).reshape(-1)
        return self.adjoint(self.apply(h))

    @cached_property
    def lag_correlations(self) -> NDArray[np.float64]:
        """``c[i, j, d] = sum_t y_i(t) y_j(t + d)`` for lags ``|d| < L``, summed over segments.

        Lag ``d`` lives at index ``d mod nfft`` of the last axis.
        """

        longest = max(seg.shape[1] for seg in self.segments)
        nfft = fft.next_fast_len(longest + self.channel_len - 1, real=True)
        total = np.zeros((self.n_mics, self.n_mics, nfft))
        for seg in self.segments:
            spectra = fft.rfft(seg, n=nfft, axis=1)
            total += fft.irfft(np.conj(spectra)[:, None, :] * spectra[None, :, :], n=nfft, axis=-1)
        return total

    @cached_property
    def trace(self) -> float:
        zero_lag = np.einsum('nnd->nd', self.lag_correlations)[:, 0]
        return float(self.channel_len * (self.n_mics - 1) * zero_lag.sum())

    @cached_property
    def gram(self) -> NDArray[np.float64]:
        """Dense ``A^T A`` of size N*L, assembled from lag correlations.

        Available whatever ``dense_threshold`` says; the threshold only
        decides whether products go through it.
        """

        n, length = self.n_mics, self.channel_len
        xc = self.lag_correlations
        lags = np.subtract.outer(np.arange(length), np.arange(length)) % xc.shape[-1]
        # Y_i^T Y_j is xc[i, j][lags]; filled block by block to keep one N*L square in memory
        energy = xc[np.arange(n), np.arange(n)][:, lags].sum(axis=0)

        dense = np.empty((n * length, n * length))
        for i in range(n):
            rows = slice(i * length, (i + 1) * length)
            for j in range(n):
                cols = slice(j * length, (j + 1) * length)
                dense[rows, cols] = energy - xc[i, i][lags] if i == j else -xc[j, i][lags]
        dense += dense.T
        dense *= 0.5
        dense.flags.writeable = False
        return dense

    def normal_operator(self) -> NDArray[np.float64] | LinearOperator:
        """``A^T A`` as a dense matrix when small enough, otherwise matrix-free."""

        if self.is_dense:
            return self.gram
        return LinearOperator(
            (self.size, self.size),
            matvec=self.normal_matvec,  # pyright: ignore[reportArgumentType]
            rmatvec=self.normal_matvec,  # pyright: ignore[reportArgumentType]
            dtype=np.float64,
        )


def _check_airs(obs: ObservationSet, airs: AirSet) -> None:
    if airs.n_mics != obs.n_mics:
        raise InvalidArgument(f'{airs.n_mics} AIR channels for {obs.n_mics} recordings')
    if airs.channel_len > obs.length:
        raise InvalidArgument(f'AIR length {airs.channel_len} exceeds recording length {obs.length}')


def cross_residual(obs: ObservationSet, airs: AirSet) -> float:
    """``sum_{m<n} |conv(y_n, h_m) - conv(y_m, h_n)|^2``, each unordered pair once."""

    _check_airs(obs, airs)
    system = CrossRelationSystem.from_observations(obs, airs.channel_len, dense_threshold=0)
    return system.residual(airs.stacked())


def assemble_normal_matrix(obs: ObservationSet, channel_len: int) -> NDArray[np.float64]:
    system = CrossRelationSystem.from_observations(obs, channel_len)
    return np.array(system.gram)
