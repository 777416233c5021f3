from __future__ import annotations

__all__ = (
    'first_order_images',
    'ground_truth_tdoas',
    'image_method_air',
    'random_geometry',
    'synthesize_observations',
    'truth_peaks',
)

import logging
from typing import TYPE_CHECKING

import numpy as np
from scipy import signal

from blind_tdoa.constants import MIN_SEPARATION, PEAKS_PER_CHANNEL, WALL_MARGIN
from blind_tdoa.errors import ChannelTooShort, InfeasibleGeometry, InvalidArgument
from blind_tdoa.models import AirSet, Geometry, ObservationSet, PeakList

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from blind_tdoa.models import RoomConfig, SourceSignal


log = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 1000


def first_order_images(source: NDArray[np.float64], dimensions: NDArray[np.float64]) -> NDArray[np.float64]:
    """Mirror ``source`` across each of the six walls of the shoebox, shape (6, 3)."""

    images = np.repeat(source[None, :], 6, axis=0)
    for axis in range(3):
        images[2 * axis, axis] = -source[axis]
        images[2 * axis + 1, axis] = 2.0 * dimensions[axis] - source[axis]
    return images


def image_method_air(room: RoomConfig, geom: Geometry, channel_len: int) -> AirSet:
    """Direct path plus the six first-order reflections for every microphone.

    Delays are rounded to whole samples; amplitudes follow ``1/distance``
    with the reflection coefficient applied once per image. Taps landing
    on the same sample add up.
    """

    geom.validate_inside(room)
    dims = np.asarray(room.dimensions, dtype=np.float64)
    source = np.asarray(geom.source_pos, dtype=np.float64)
    emitters = np.vstack([source, first_order_images(source, dims)])
    gains = np.r_[1.0, np.full(PEAKS_PER_CHANNEL - 1, room.reflection_coeff)]

    mics = np.asarray(geom.mic_pos, dtype=np.float64)
    # (N, PEAKS_PER_CHANNEL) distances from every emitter to every microphone
    dist = np.linalg.norm(mics[:, None, :] - emitters[None, :, :], axis=-1)
    delays = np.rint(dist * room.sample_rate / room.speed_of_sound).astype(np.int64)

    longest = int(delays.max())
    if longest >= channel_len:
        raise ChannelTooShort(longest + 1, channel_len)

    channels = np.zeros((len(mics), channel_len))
    for n in range(len(mics)):
        np.add.at(channels[n], delays[n], gains / dist[n])

    return AirSet(channels, room.sample_rate)


def synthesize_observations(air: AirSet, src: SourceSignal) -> ObservationSet:
    if air.sample_rate != src.sample_rate:
        raise InvalidArgument(
            f'sample rate mismatch: AIRs at {air.sample_rate} Hz, source at {src.sample_rate} Hz'
        )

    recordings = np.stack([signal.convolve(h, src.samples) for h in air.channels])
    return ObservationSet(recordings, air.sample_rate, 0.0)


def random_geometry(room: RoomConfig, n_mics: int, seed: int) -> Geometry:
    """Draw a source and ``n_mics`` microphones uniformly inside ``room``.

    Every point keeps ``WALL_MARGIN`` metres from the walls and
    ``MIN_SEPARATION`` metres from every other point.
    """

    if n_mics < 2:
        raise InvalidArgument(f'need at least 2 microphones, got {n_mics}')

    dims = np.asarray(room.dimensions, dtype=np.float64)
    low = np.full(3, WALL_MARGIN)
    high = dims - WALL_MARGIN
    if np.any(high <= low):
        raise InfeasibleGeometry(
            f'room {room.dimensions} is too small for a {WALL_MARGIN} m wall margin'
        )

    rng = np.random.default_rng(seed)
    points: list[NDArray[np.float64]] = []
    attempts = 0
    while len(points) < n_mics + 1:
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise InfeasibleGeometry(
                f'could not place {n_mics} microphones and a source {MIN_SEPARATION} m apart '
                f'in room {room.dimensions} after {MAX_PLACEMENT_ATTEMPTS} attempts'
            )
        candidate = rng.uniform(low, high)
        if all(np.linalg.norm(candidate - p) >= MIN_SEPARATION for p in points):
            points.append(candidate)

    source, *mics = (tuple(float(v) for v in p) for p in points)
    return Geometry(source_pos=source, mic_pos=tuple(mics))  # pyright: ignore[reportArgumentType]


def ground_truth_tdoas(air: AirSet) -> NDArray[np.int64]:
    """Entry (m, n) is the direct-path index of channel m minus that of channel n."""

    direct = np.empty(air.n_mics, dtype=np.int64)
    for n, channel in enumerate(air.channels):
        taps = np.flatnonzero(channel)
        if taps.size == 0:
            raise InvalidArgument(f'AIR channel {n} is empty')
        direct[n] = taps[0]
    return direct[:, None] - direct[None, :]


def truth_peaks(air: AirSet, channel: int) -> PeakList:
    """The nonzero taps of a ground-truth channel, which is what estimates are matched against."""

    taps = air.channels[channel]
    positions = np.flatnonzero(taps)
    return PeakList(positions, taps[positions])
