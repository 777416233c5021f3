from __future__ import annotations

__all__ = (
    'db_to_ratio',
    'gen_pink_noise',
    'gen_white_noise',
    'inject_noise',
    'load_audio_file',
    'make_source',
    'ratio_to_db',
)

import logging
import math
import warnings
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from scipy import fft, signal
from scipy.io import wavfile

from blind_tdoa.constants import DEFAULT_SAMPLE_RATE, PINK_MIN_LENGTH
from blind_tdoa.errors import InvalidArgument, NotFoundError, UnsupportedFormat
from blind_tdoa.models import ObservationSet, SourceSignal
from blind_tdoa.models.signals import rms
from blind_tdoa.utils.formats import human_join

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from blind_tdoa.models import NoiseSpec


log = logging.getLogger(__name__)

INT16_SCALE = 32768.0


def _rng(*entropy: int) -> np.random.Generator:
    if any(e < 0 for e in entropy):
        raise InvalidArgument(f'seeds must be non-negative, got {entropy}')
    return np.random.default_rng(list(entropy) if len(entropy) > 1 else entropy[0])


def db_to_ratio(db: float) -> float:
    return 10.0 ** (-db / 20.0)


def ratio_to_db(ratio: float) -> float:
    if ratio <= 0:
        raise InvalidArgument(f'noise ratio must be positive to express it in dB, got {ratio}')
    return 20.0 * math.log10(1.0 / ratio)


def gen_white_noise(length: int, seed: int, *, sample_rate: int = DEFAULT_SAMPLE_RATE) -> SourceSignal:
    if length < 1:
        raise InvalidArgument(f'signal length must be >= 1, got {length}')
    samples = _rng(seed).standard_normal(length)
    return SourceSignal(samples, sample_rate, 'white')


def gen_pink_noise(
    length: int,
    seed: int,
    *,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    slope: float = 1.0,
) -> SourceSignal:
    """Gaussian noise whose power spectral density falls as ``1/f**slope``.

    White noise is shaped in the frequency domain (amplitude ``f**(-slope/2)``,
    DC bin zeroed) and the result is standardized to zero mean and unit
    variance.
    """

    if length < PINK_MIN_LENGTH:
        raise InvalidArgument(f'pink noise needs at least {PINK_MIN_LENGTH} samples, got {length}')

    spectrum = fft.rfft(_rng(seed).standard_normal(length))
    freqs = fft.rfftfreq(length)
    shaping = np.zeros_like(freqs)
    shaping[1:] = freqs[1:] ** (-slope / 2.0)
    shaped = fft.irfft(spectrum * shaping, n=length)

    samples = (shaped - shaped.mean()) / shaped.std()
    return SourceSignal(samples, sample_rate, 'pink')


def _to_float(data: NDArray[np.generic], path: Path) -> NDArray[np.float64]:
    if data.dtype == np.int16:
        return data.astype(np.float64) / INT16_SCALE
    if data.dtype in {np.dtype(np.float32), np.dtype(np.float64)}:
        return data.astype(np.float64)
    raise UnsupportedFormat(f'{path}: unsupported sample encoding {data.dtype}, expected 16-bit PCM or float')


def load_audio_file(
    path: str | Path,
    *,
    sample_rate: int | None = None,
    max_samples: int | None = None,
) -> SourceSignal:
    """Read a mono WAVE file as a source signal.

    Parameters
    ----------
    path:
        RIFF/WAVE file holding 16-bit integer or 32-bit float PCM.
    sample_rate:
        Resample (polyphase) to this rate when it differs from the file's.
    max_samples:
        Keep at most this many samples, counted after resampling.
    """

    path = Path(path)
    if not path.is_file():
        raise NotFoundError(f'audio file {path} does not exist')

    try:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except ValueError as exc:
        raise UnsupportedFormat(f'{path}: {exc}') from None

    if data.ndim != 1:
        raise UnsupportedFormat(f'{path}: expected a mono file, found {data.shape[1]} channels')

    samples = _to_float(data, path)
    if sample_rate is not None and sample_rate != rate:
        g = math.gcd(sample_rate, rate)
        log.debug(f'Resampling {path.name} from {rate} Hz to {sample_rate} Hz')
        samples = signal.resample_poly(samples, sample_rate // g, rate // g)
        rate = sample_rate

    if max_samples is not None:
        samples = samples[:max_samples]

    return SourceSignal(samples, int(rate), f'file:{path}')


def make_source(
    spec: str,
    length: int,
    seed: int,
    *,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> SourceSignal:
    """Build a source from a ``white``, ``pink`` or ``file:<path>`` spec."""

    kind, _, target = spec.partition(':')
    match kind:
        case 'white':
            return gen_white_noise(length, seed, sample_rate=sample_rate)
        case 'pink':
            return gen_pink_noise(length, seed, sample_rate=sample_rate)
        case 'file' if target:
            return load_audio_file(target, sample_rate=sample_rate, max_samples=length)
        case _:
            expected = human_join(['white', 'pink', 'file:<path>'])
            raise InvalidArgument(f'unknown source spec {spec!r}, expected {expected}')


def inject_noise(clean: ObservationSet, spec: NoiseSpec) -> ObservationSet:
    """Add white Gaussian noise with ``RMS(noise_n) = s * RMS(clean_n)`` on every channel.

    Channel ``n`` draws from a generator seeded with ``(seed, n)``, so each
    channel's noise does not depend on how many channels there are.
    """

    if spec.ratio_s < 0:
        raise InvalidArgument(f'noise ratio must be >= 0, got {spec.ratio_s}')
    if spec.ratio_s == 0:
        return ObservationSet(clean.recordings, clean.sample_rate, 0.0)

    noisy = np.array(clean.recordings)
    for n, channel in enumerate(clean.recordings):
        level = rms(channel)
        if level <= 0:
            raise InvalidArgument(f'clean recording {n} is silent')
        noise = _rng(spec.seed, n).standard_normal(channel.size)
        noisy[n] += noise * (spec.ratio_s * level / rms(noise))

    return ObservationSet(noisy, clean.sample_rate, spec.ratio_s)
