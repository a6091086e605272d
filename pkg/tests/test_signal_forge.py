"""Pruebas de las primitivas de forma de onda."""

import math
from pathlib import Path

import numpy as np
import pytest

from tagshield_core.errors import BadSpec, InvalidClip, LengthMismatch, ZeroEnergy
from tagshield_core.signal_forge import (
    fit_length,
    load_wav,
    measured_snr_db,
    mix_at_snr,
    mix_components,
    normalize_rms,
    resample,
    rms,
    save_wav,
    synth_music,
    synth_noise,
    synthesize,
)
from tagshield_core.types import AudioClip, SynthKind, SynthSpec

from .conftest import SAMPLE_RATE_HZ, random_clip, sine


def _peak_hz(clip: AudioClip) -> float:
    spectrum = np.abs(np.fft.rfft(clip.samples))
    freqs = np.fft.rfftfreq(len(clip), d=1.0 / clip.sample_rate_hz)
    return float(freqs[int(np.argmax(spectrum))])


class TestAudioClip:
    def test_rejects_empty_and_non_finite(self):
        with pytest.raises(InvalidClip):
            AudioClip(np.array([]))
        with pytest.raises(InvalidClip):
            AudioClip(np.array([0.0, np.nan]))
        with pytest.raises(InvalidClip):
            AudioClip(np.zeros(4), sample_rate_hz=0)

    def test_samples_are_read_only(self):
        clip = AudioClip(np.zeros(4))
        with pytest.raises(ValueError):
            clip.samples[0] = 1.0


class TestRms:
    def test_zero_clip(self):
        assert rms(AudioClip(np.zeros(100))) == 0.0

    def test_constant_clip(self):
        assert rms(AudioClip(np.full(100, 0.5))) == pytest.approx(0.5)

    def test_sine_whole_periods(self):
        clip = sine(50.0, SAMPLE_RATE_HZ)
        assert rms(clip) == pytest.approx(1 / math.sqrt(2), abs=1e-4)


class TestNormalizeRms:
    def test_halves_every_sample(self):
        clip = AudioClip(np.full(64, 0.2))
        result = normalize_rms(clip, 0.1)
        np.testing.assert_allclose(result.samples, clip.samples / 2)

    def test_identity_at_target(self):
        clip = AudioClip(np.full(64, 0.1))
        np.testing.assert_allclose(normalize_rms(clip, 0.1).samples, clip.samples)

    def test_random_clip_hits_target(self, rng):
        clip = AudioClip(rng.standard_normal(1000))
        assert rms(normalize_rms(clip, 0.05)) == pytest.approx(0.05, abs=1e-6)

    def test_idempotent(self, rng):
        clip = AudioClip(rng.standard_normal(777) * 0.3)
        once = normalize_rms(clip, 0.1)
        np.testing.assert_allclose(normalize_rms(once, 0.1).samples, once.samples, rtol=1e-12)

    def test_silent_clip(self):
        with pytest.raises(ZeroEnergy):
            normalize_rms(AudioClip(np.zeros(10)), 0.1)


class TestMixAtSnr:
    def test_equal_power_at_zero_db(self, rng):
        music, noise = random_clip(rng, 512), random_clip(rng, 512)
        assert mix_components(music, [noise], 0.0).gain == pytest.approx(1.0)

    def test_gain_at_twenty_db(self, rng):
        music, noise = random_clip(rng, 512), random_clip(rng, 512)
        assert mix_components(music, [noise], 20.0).gain == pytest.approx(0.1)

    def test_two_noises_measured_snr(self, rng):
        music = random_clip(rng, 2048, 0.13)
        noises = [random_clip(rng, 2048, 0.05), random_clip(rng, 2048, 0.3)]
        result = mix_components(music, noises, -5.0)
        assert measured_snr_db(music, result.noise) == pytest.approx(-5.0, abs=0.05)
        np.testing.assert_allclose(
            result.mixture.samples, music.samples + result.noise.samples
        )

    def test_snr_exactness_over_random_cases(self, rng):
        """SNR medida a menos de 0.05 dB del objetivo con 1, 2 o 4 ruidos."""
        for _ in range(1000):
            n = int(rng.integers(64, 512))
            count = int(rng.choice([1, 2, 4]))
            snr_db = float(rng.uniform(-10, 10))
            music = random_clip(rng, n, float(rng.uniform(0.01, 0.5)))
            noises = [random_clip(rng, n, float(rng.uniform(0.01, 0.5))) for _ in range(count)]
            result = mix_components(music, noises, snr_db)
            assert abs(measured_snr_db(music, result.noise) - snr_db) < 0.05

    @pytest.mark.parametrize("count", [1, 2, 4])
    @pytest.mark.parametrize("factor", [0.25, 3.0])
    def test_scale_covariance(self, rng, count, factor):
        music = random_clip(rng, 1024, 0.2)
        noises = [random_clip(rng, 1024, float(rng.uniform(0.05, 0.4))) for _ in range(count)]
        mixture = mix_at_snr(music, noises, 2.5)
        scaled = mix_at_snr(
            AudioClip(music.samples * factor, music.sample_rate_hz),
            [AudioClip(noise.samples * factor, noise.sample_rate_hz) for noise in noises],
            2.5,
        )
        np.testing.assert_allclose(scaled.samples, mixture.samples * factor, rtol=1e-9, atol=1e-12)

    def test_length_mismatch(self, rng):
        with pytest.raises(LengthMismatch):
            mix_at_snr(random_clip(rng, 100), [random_clip(rng, 99)], 0.0)

    def test_silent_inputs(self, rng):
        with pytest.raises(ZeroEnergy):
            mix_at_snr(AudioClip(np.zeros(100)), [random_clip(rng, 100)], 0.0)
        with pytest.raises(ZeroEnergy):
            mix_at_snr(random_clip(rng, 100), [AudioClip(np.zeros(100))], 0.0)


class TestFitLength:
    def test_exact_length_is_identity(self, rng):
        clip = random_clip(rng, 59049)
        assert fit_length(clip, 59049) is clip

    def test_crop_at_offset_zero(self, rng):
        clip = random_clip(rng, 118098)
        np.testing.assert_array_equal(fit_length(clip, 59049, offset=0).samples, clip.samples[:59049])

    def test_loop_padding(self, rng):
        clip = random_clip(rng, 30000)
        result = fit_length(clip, 59049)
        index = np.arange(59049)
        np.testing.assert_array_equal(result.samples, clip.samples[index % 30000])

    def test_random_offset_is_in_range(self, rng):
        clip = AudioClip(np.arange(1000, dtype=np.float64))
        result = fit_length(clip, 100, rng=rng)
        start = int(result.samples[0])
        np.testing.assert_array_equal(result.samples, np.arange(start, start + 100))

    def test_bad_offset(self, rng):
        with pytest.raises(ValueError):
            fit_length(random_clip(rng, 100), 50, offset=51)


class TestResample:
    def test_same_rate_is_identity(self, rng):
        clip = random_clip(rng, 100)
        assert resample(clip, SAMPLE_RATE_HZ) is clip

    def test_halves_length(self):
        clip = sine(440.0, 2 * 11025, 44100)
        result = resample(clip, 22050)
        assert result.sample_rate_hz == 22050
        assert abs(len(result) - 11025) <= 1

    def test_keeps_spectral_peak(self):
        result = resample(sine(440.0, 44100, 44100), 22050)
        assert _peak_hz(result) == pytest.approx(440.0, abs=2.0)


class TestSynthesis:
    def test_music_is_deterministic(self):
        spec = SynthSpec(SynthKind.music, seed=7, duration_s=0.5)
        assert synth_music(spec) == synth_music(spec)

    def test_music_fundamental_peak(self):
        spec = SynthSpec(
            SynthKind.music,
            seed=3,
            duration_s=1.0,
            params={"fundamental_hz": 220.0, "n_harmonics": 4, "envelope": "steady"},
        )
        assert _peak_hz(synth_music(spec)) == pytest.approx(220.0, abs=2.0)

    def test_music_duration(self):
        spec = SynthSpec(SynthKind.music, seed=1, duration_s=2.7)
        assert len(synth_music(spec)) == 59535

    def test_noise_is_deterministic(self):
        spec = SynthSpec(SynthKind.noise, seed=11, duration_s=0.5, params={"tilt_db_per_octave": -3.0})
        assert synth_noise(spec) == synth_noise(spec)

    def test_white_noise_is_flat_across_octaves(self):
        spec = SynthSpec(SynthKind.noise, seed=5, duration_s=4.0, params={"tilt_db_per_octave": 0.0})
        clip = synth_noise(spec)
        power = np.abs(np.fft.rfft(clip.samples)) ** 2
        freqs = np.fft.rfftfreq(len(clip), d=1.0 / clip.sample_rate_hz)
        edges = [125.0 * 2**k for k in range(7)]
        bands = [
            power[(freqs >= low) & (freqs < high)].mean()
            for low, high in zip(edges[:-1], edges[1:], strict=True)
        ]
        levels_db = 10 * np.log10(np.asarray(bands) / np.mean(bands))
        assert np.all(np.abs(levels_db) < 6.0)

    def test_burst_noise_has_silences(self):
        spec = SynthSpec(
            SynthKind.noise, seed=2, duration_s=2.0, params={"burst": True, "burst_rate_hz": 4.0}
        )
        clip = synth_noise(spec)
        assert np.mean(clip.samples == 0.0) > 0.10

    def test_dispatch_and_bad_specs(self):
        music = SynthSpec(SynthKind.music, seed=1, duration_s=0.1)
        assert synthesize(music) == synth_music(music)
        with pytest.raises(BadSpec):
            synth_noise(music)
        with pytest.raises(BadSpec):
            synth_music(SynthSpec(SynthKind.music, seed=1, duration_s=-1.0))
        with pytest.raises(BadSpec):
            synth_music(SynthSpec(SynthKind.music, seed=1, duration_s=0.1, params={"envelope": "wobble"}))
        with pytest.raises(BadSpec):
            synth_noise(SynthSpec(SynthKind.noise, seed=1, duration_s=0.1, params={"level_rms": 2.0}))


class TestWavIo:
    def test_float_round_trip(self, rng, tmp_path: Path):
        clip = random_clip(rng, 1000)
        path = tmp_path / "clip.wav"
        save_wav(clip, path)
        loaded = load_wav(path)
        assert loaded.sample_rate_hz == SAMPLE_RATE_HZ
        np.testing.assert_allclose(loaded.samples, clip.samples, atol=1e-6)

    def test_pcm16_and_resampling_on_load(self, tmp_path: Path):
        clip = sine(440.0, 44100, 44100)
        path = tmp_path / "clip.wav"
        save_wav(AudioClip(clip.samples * 0.5, 44100), path, subtype="PCM_16")
        loaded = load_wav(path, 22050)
        assert loaded.sample_rate_hz == 22050
        assert abs(len(loaded) - 22050) <= 1
        assert _peak_hz(loaded) == pytest.approx(440.0, abs=2.0)
