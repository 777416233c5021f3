from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import signal
from scipy.io import wavfile

from blind_tdoa.errors import InvalidArgument, NotFoundError, UnsupportedFormat
from blind_tdoa.models import NoiseSpec, ObservationSet
from blind_tdoa.models.signals import rms
from blind_tdoa.signal_gen import (
    db_to_ratio,
    gen_pink_noise,
    gen_white_noise,
    inject_noise,
    load_audio_file,
    make_source,
    ratio_to_db,
)

if TYPE_CHECKING:
    from pathlib import Path


@pytest.mark.parametrize(
    'db,ratio',
    [(0, 1.0), (6, 0.5012), (14, 0.1995), (20, 0.1), (40, 0.01)],
)
def test_db_to_ratio(db: float, ratio: float) -> None:
    assert db_to_ratio(db) == pytest.approx(ratio, abs=1e-3)


def test_ratio_to_db_inverts() -> None:
    assert ratio_to_db(db_to_ratio(14.0)) == pytest.approx(14.0)
    with pytest.raises(InvalidArgument):
        ratio_to_db(0.0)


def test_white_noise_is_deterministic_per_seed() -> None:
    a = gen_white_noise(4096, 7)
    b = gen_white_noise(4096, 7)
    c = gen_white_noise(4096, 8)
    assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert a.label == 'white'


def test_white_noise_statistics() -> None:
    x = gen_white_noise(20_000, 3).samples
    assert abs(x.mean()) < 0.05
    assert x.var() == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize('length', [0, -5])
def test_white_noise_rejects_bad_length(length: int) -> None:
    with pytest.raises(InvalidArgument):
        gen_white_noise(length, 0)


def test_negative_seed_is_rejected() -> None:
    with pytest.raises(InvalidArgument):
        gen_white_noise(16, -1)


def test_pink_noise_is_standardized() -> None:
    x = gen_pink_noise(4096, 5).samples
    assert abs(x.mean()) < 1e-12
    assert x.var() == pytest.approx(1.0, abs=1e-9)


def test_pink_noise_too_short() -> None:
    with pytest.raises(InvalidArgument):
        gen_pink_noise(15, 0)


def test_pink_noise_spectrum_falls_as_one_over_f() -> None:
    x = gen_pink_noise(1 << 16, 11).samples
    freqs, power = signal.welch(x, nperseg=1024)
    band = (freqs > 0.01) & (freqs < 0.4)
    slope = np.polyfit(np.log10(freqs[band]), np.log10(power[band]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.2)


def test_load_mono_wav(tmp_path: Path) -> None:
    data = (np.sin(np.arange(1000) * 0.05) * 12000).astype(np.int16)
    path = tmp_path / 'tone.wav'
    wavfile.write(path, 8000, data)

    src = load_audio_file(path)
    assert len(src) == 1000
    assert src.sample_rate == 8000
    assert_allclose(src.samples, data / 32768.0)
    assert src.label == f'file:{path}'


def test_load_wav_resamples_and_truncates(tmp_path: Path) -> None:
    data = np.random.default_rng(0).standard_normal(1000).astype(np.float32)
    path = tmp_path / 'noise.wav'
    wavfile.write(path, 16000, data)

    assert len(load_audio_file(path, sample_rate=8000)) == 500
    assert len(load_audio_file(path, max_samples=300)) == 300


def test_load_stereo_wav_is_unsupported(tmp_path: Path) -> None:
    path = tmp_path / 'stereo.wav'
    wavfile.write(path, 8000, np.ones((1000, 2), dtype=np.int16))
    with pytest.raises(UnsupportedFormat):
        load_audio_file(path)


def test_load_silent_wav_is_invalid(tmp_path: Path) -> None:
    path = tmp_path / 'silence.wav'
    wavfile.write(path, 8000, np.zeros(1000, dtype=np.int16))
    with pytest.raises(InvalidArgument):
        load_audio_file(path)


def test_load_missing_or_garbage_file(tmp_path: Path) -> None:
    with pytest.raises(NotFoundError):
        load_audio_file(tmp_path / 'missing.wav')

    garbage = tmp_path / 'garbage.wav'
    garbage.write_bytes(b'not a riff file at all')
    with pytest.raises(UnsupportedFormat):
        load_audio_file(garbage)


def test_make_source_dispatch(tmp_path: Path) -> None:
    assert make_source('white', 64, 1).label == 'white'
    assert make_source('pink', 64, 1).label == 'pink'

    path = tmp_path / 'src.wav'
    wavfile.write(path, 16000, np.arange(1, 101, dtype=np.int16))
    assert len(make_source(f'file:{path}', 50, 0)) == 50

    for bad in ('brown', 'file:', ''):
        with pytest.raises(InvalidArgument):
            make_source(bad, 64, 1)


def _clean(n_mics: int = 3) -> ObservationSet:
    rng = np.random.default_rng(42)
    return ObservationSet(rng.standard_normal((n_mics, 500)) * np.arange(1, n_mics + 1)[:, None])


def test_inject_noise_zero_ratio_is_identity() -> None:
    clean = _clean()
    noisy = inject_noise(clean, NoiseSpec(0.0, 9))
    assert_array_equal(noisy.recordings, clean.recordings)
    assert noisy.noise_ratio == 0.0


@pytest.mark.parametrize('s', [0.1, 1.0])
def test_inject_noise_matches_channel_rms(s: float) -> None:
    clean = _clean()
    noisy = inject_noise(clean, NoiseSpec(s, 9))
    assert noisy.noise_ratio == s
    for n in range(clean.n_mics):
        noise = noisy.recordings[n] - clean.recordings[n]
        assert rms(noise) == pytest.approx(s * rms(clean.recordings[n]), rel=1e-10)


def test_inject_noise_per_channel_streams() -> None:
    clean = _clean(3)
    full = inject_noise(clean, NoiseSpec(0.5, 4))
    pair = inject_noise(clean.subset([0, 1]), NoiseSpec(0.5, 4))
    assert_array_equal(full.recordings[:2], pair.recordings)
    assert_array_equal(full.recordings, inject_noise(clean, NoiseSpec(0.5, 4)).recordings)


def test_inject_noise_rejects_negative_ratio() -> None:
    with pytest.raises(InvalidArgument):
        inject_noise(_clean(), NoiseSpec(-0.1, 0))
