"""
Forja de Señales - Operaciones sobre Formas de Onda

Este módulo reúne todas las operaciones a nivel de forma de onda: síntesis
determinista de música y ruido a escala de escritorio, normalización RMS,
mezcla con SNR exacta, recorte/relleno, remuestreo y lectura/escritura WAV.
Todas las funciones son puras sobre clips inmutables.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import soundfile as sf
import soxr

from .errors import BadSpec, InvalidClip, LengthMismatch, ZeroEnergy
from .types import DEFAULT_SAMPLE_RATE_HZ, AudioClip, FloatArray, SynthKind, SynthSpec

logger = logging.getLogger(__name__)

# Rango de frecuencias fundamentales cuando la especificación no fija una
MUSIC_F0_RANGE_HZ = (80.0, 640.0)
# Nivel RMS por defecto de las señales sintéticas (alrededor de -20 dBFS)
SYNTH_LEVEL_RANGE = (0.07, 0.14)
# Referencia para la pendiente espectral del ruido
NOISE_TILT_REFERENCE_HZ = 100.0
ENVELOPES = ("steady", "pulse", "swell")


def rms(clip: AudioClip) -> float:
    """Raíz del valor cuadrático medio de las muestras."""
    return float(np.sqrt(np.mean(np.square(clip.samples))))


def scale(clip: AudioClip, factor: float) -> AudioClip:
    """Multiplica todas las muestras por un escalar."""
    return AudioClip(samples=clip.samples * factor, sample_rate_hz=clip.sample_rate_hz)


def normalize_rms(clip: AudioClip, target_rms: float) -> AudioClip:
    """Escala el clip para que su RMS sea exactamente `target_rms`."""
    if not target_rms > 0:
        raise ValueError(f"target_rms debe ser positivo: {target_rms}")
    current = rms(clip)
    if current == 0:
        raise ZeroEnergy("No se puede normalizar un clip silencioso")
    return scale(clip, target_rms / current)


def apply_gain_db(clip: AudioClip, gain_db: float) -> AudioClip:
    """Aplica una ganancia en decibelios."""
    return scale(clip, 10.0 ** (gain_db / 20.0))


@dataclass(frozen=True)
class MixResult:
    """Resultado detallado de una mezcla: la mezcla, el ruido escalado y su ganancia."""

    mixture: AudioClip
    noise: AudioClip
    gain: float


def composite_noise(noises: list[AudioClip]) -> AudioClip:
    """
    Suma de ruidos con igual RMS: cada ruido se lleva al RMS medio del
    conjunto antes de sumarlos. Con un solo ruido es la identidad.
    """
    if not noises:
        raise InvalidClip("Se requiere al menos un ruido para mezclar")
    levels = [rms(noise) for noise in noises]
    if any(level == 0 for level in levels):
        raise ZeroEnergy("Uno de los ruidos es silencioso")
    if len(noises) == 1:
        return noises[0]
    common = float(np.mean(levels))
    total = np.zeros_like(noises[0].samples)
    for noise, level in zip(noises, levels, strict=True):
        total = total + noise.samples * (common / level)
    return AudioClip(samples=total, sample_rate_hz=noises[0].sample_rate_hz)


def mix_components(music: AudioClip, noises: list[AudioClip], snr_db: float) -> MixResult:
    """
    Mezcla música y ruido compuesto de forma que
    20·log10(rms(música)/rms(ruido escalado)) == snr_db.
    """
    for noise in noises:
        if len(noise) != len(music) or noise.sample_rate_hz != music.sample_rate_hz:
            raise LengthMismatch(
                f"Ruido de {len(noise)} muestras a {noise.sample_rate_hz} Hz frente a "
                f"música de {len(music)} muestras a {music.sample_rate_hz} Hz"
            )
    music_level = rms(music)
    if music_level == 0:
        raise ZeroEnergy("La música es silenciosa")
    composite = composite_noise(noises)
    noise_level = rms(composite)
    if noise_level == 0:
        raise ZeroEnergy("El ruido compuesto es silencioso")

    gain = (music_level / noise_level) * 10.0 ** (-snr_db / 20.0)
    scaled = composite.samples * gain
    return MixResult(
        mixture=AudioClip(music.samples + scaled, music.sample_rate_hz),
        noise=AudioClip(scaled, music.sample_rate_hz),
        gain=gain,
    )


def mix_at_snr(music: AudioClip, noises: list[AudioClip], snr_db: float) -> AudioClip:
    """Mezcla música con uno o varios ruidos a la SNR indicada (RMS de clip completo)."""
    return mix_components(music, noises, snr_db).mixture


def measured_snr_db(music: AudioClip, noise: AudioClip) -> float:
    """SNR medida entre dos componentes."""
    return 20.0 * math.log10(rms(music) / rms(noise))


def fit_length(
    clip: AudioClip,
    n_samples: int,
    offset: int | None = None,
    rng: np.random.Generator | None = None,
) -> AudioClip:
    """
    Devuelve exactamente `n_samples` muestras. Los clips largos se recortan en
    `offset` (o en un desplazamiento aleatorio si se pasa `rng`, o en 0); los
    cortos se rellenan repitiéndose en bucle.
    """
    if n_samples <= 0:
        raise ValueError(f"n_samples debe ser positivo: {n_samples}")
    length = len(clip)
    if length == n_samples:
        return clip
    if length < n_samples:
        # Relleno en bucle: result[i] == clip[i mod length]
        return AudioClip(np.resize(clip.samples, n_samples), clip.sample_rate_hz)

    max_offset = length - n_samples
    if offset is None:
        offset = int(rng.integers(0, max_offset + 1)) if rng is not None else 0
    if not 0 <= offset <= max_offset:
        raise ValueError(f"offset {offset} fuera de [0, {max_offset}]")
    return AudioClip(clip.samples[offset : offset + n_samples], clip.sample_rate_hz)


def resample(clip: AudioClip, target_rate_hz: int) -> AudioClip:
    """Remuestreo de banda limitada (libsoxr, calidad alta)."""
    if target_rate_hz <= 0:
        raise ValueError(f"Tasa de destino no válida: {target_rate_hz}")
    if clip.sample_rate_hz == target_rate_hz:
        return clip
    samples = soxr.resample(
        clip.samples, clip.sample_rate_hz, target_rate_hz, quality="HQ"
    )
    return AudioClip(np.asarray(samples, dtype=np.float64), target_rate_hz)


def _check_spec(spec: SynthSpec, kind: SynthKind) -> int:
    """Valida la especificación y devuelve el número de muestras."""
    if spec.kind is not kind:
        raise BadSpec(f"Se esperaba una especificación '{kind.value}': {spec.kind}")
    if not (math.isfinite(spec.duration_s) and spec.duration_s > 0):
        raise BadSpec(f"Duración no válida: {spec.duration_s}")
    if spec.sample_rate_hz <= 0:
        raise BadSpec(f"Tasa de muestreo no válida: {spec.sample_rate_hz}")
    n_samples = int(round(spec.duration_s * spec.sample_rate_hz))
    if n_samples < 1:
        raise BadSpec(f"Duración demasiado corta: {spec.duration_s}")
    return n_samples


def _level(spec: SynthSpec, rng: np.random.Generator) -> float:
    drawn = float(rng.uniform(*SYNTH_LEVEL_RANGE))
    level = float(spec.params.get("level_rms", drawn))
    if not 0.05 <= level <= 0.5:
        raise BadSpec(f"level_rms debe estar en [0.05, 0.5]: {level}")
    return level


def _envelope(
    kind: str, t: FloatArray, duration_s: float, rate_hz: float, phase: float
) -> FloatArray:
    """Envolvente lenta de amplitud."""
    match kind:
        case "steady":
            return 1.0 + 0.15 * np.sin(2 * np.pi * 0.7 * t + phase)
        case "pulse":
            beat = np.mod(t * rate_hz + phase / (2 * np.pi), 1.0)
            return 0.2 + 0.8 * np.exp(-6.0 * beat)
        case "swell":
            return 0.25 + 0.75 * np.sin(np.pi * t / duration_s) ** 2
        case _:
            raise BadSpec(f"Envolvente no válida: {kind!r}")


def synth_music(spec: SynthSpec) -> AudioClip:
    """
    Señal armónica determinista: una fundamental más armónicos enteros con
    amplitud 1/k y una envolvente lenta. Iguales especificaciones producen
    clips idénticos bit a bit.
    """
    n_samples = _check_spec(spec, SynthKind.music)
    rng = np.random.default_rng(spec.seed)
    sr = spec.sample_rate_hz

    # Todos los sorteos ocurren en el mismo orden sin importar los parámetros
    drawn_f0 = float(rng.uniform(*MUSIC_F0_RANGE_HZ))
    drawn_harmonics = int(rng.integers(2, 13))
    drawn_envelope = ENVELOPES[int(rng.integers(0, len(ENVELOPES)))]
    phases = rng.uniform(0, 2 * np.pi, size=64)
    envelope_phase = float(rng.uniform(0, 2 * np.pi))
    pulse_rate = float(rng.uniform(2.0, 4.0))
    level = _level(spec, rng)

    f0 = float(spec.params.get("fundamental_hz", drawn_f0))
    n_harmonics = int(spec.params.get("n_harmonics", drawn_harmonics))
    envelope = str(spec.params.get("envelope", drawn_envelope))
    if not 0 < f0 < sr / 2:
        raise BadSpec(f"Fundamental fuera de rango: {f0}")
    if not 1 <= n_harmonics <= len(phases):
        raise BadSpec(f"Número de armónicos fuera de rango: {n_harmonics}")

    t = np.arange(n_samples) / sr
    tone = np.zeros(n_samples)
    for k in range(1, n_harmonics + 1):
        # Sin aliasing: se omiten armónicos por encima del 90 % de Nyquist
        if k * f0 >= 0.45 * sr:
            break
        tone += np.sin(2 * np.pi * k * f0 * t + phases[k - 1]) / k
    samples = tone * _envelope(envelope, t, spec.duration_s, pulse_rate, envelope_phase)
    return normalize_rms(AudioClip(samples, sr), level)


def synth_noise(spec: SynthSpec) -> AudioClip:
    """
    Ruido aperiódico con pendiente espectral (dB por octava, 0 = blanco) y
    envolvente opcional de ráfagas que imita aplausos o multitudes.
    """
    n_samples = _check_spec(spec, SynthKind.noise)
    rng = np.random.default_rng(spec.seed)
    sr = spec.sample_rate_hz

    white = rng.standard_normal(n_samples)
    level = _level(spec, rng)
    tilt = float(spec.params.get("tilt_db_per_octave", 0.0))

    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / sr)
    exponent = tilt / (20.0 * math.log10(2.0))
    gains = (np.maximum(freqs, NOISE_TILT_REFERENCE_HZ) / NOISE_TILT_REFERENCE_HZ) ** exponent
    gains[0] = 0.0
    samples = np.fft.irfft(spectrum * gains, n=n_samples)

    if spec.params.get("burst", False):
        rate = float(spec.params.get("burst_rate_hz", 4.0))
        if rate <= 0:
            raise BadSpec(f"burst_rate_hz debe ser positivo: {rate}")
        samples = samples * _burst_gate(n_samples, sr, rate, rng)
    return normalize_rms(AudioClip(samples, sr), level)


def _burst_gate(
    n_samples: int, sample_rate_hz: int, rate_hz: float, rng: np.random.Generator
) -> FloatArray:
    """Compuerta de ráfagas: segmentos activos y silencios exactos alternados."""
    gate = np.zeros(n_samples)
    mean_len = sample_rate_hz / (2.0 * rate_hz)
    ramp = max(1, int(0.005 * sample_rate_hz))
    position, active = 0, True
    while position < n_samples:
        length = max(2 * ramp + 1, int(rng.uniform(0.5, 1.5) * mean_len))
        end = min(n_samples, position + length)
        if active:
            segment = np.ones(end - position)
            fade = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, min(ramp, segment.size)))
            segment[: fade.size] *= fade
            segment[segment.size - fade.size :] *= fade[::-1]
            gate[position:end] = segment
        position, active = end, not active
    return gate


def synthesize(spec: SynthSpec) -> AudioClip:
    """Despacha la síntesis según el tipo de especificación."""
    match spec.kind:
        case SynthKind.music:
            return synth_music(spec)
        case SynthKind.noise:
            return synth_noise(spec)


def load_wav(path: Path, target_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ) -> AudioClip:
    """Lee un WAV, lo mezcla a mono y lo remuestrea a la tasa interna."""
    data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    clip = AudioClip(samples=data.mean(axis=1), sample_rate_hz=int(rate))
    if clip.sample_rate_hz != target_rate_hz:
        logger.debug(
            "Remuestreando %s de %d a %d Hz", path, clip.sample_rate_hz, target_rate_hz
        )
    return resample(clip, target_rate_hz)


def save_wav(
    clip: AudioClip, path: Path, subtype: Literal["FLOAT", "PCM_16"] = "FLOAT"
) -> None:
    """Escribe un WAV mono (32 bits flotante o 16 bits entero)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = clip.samples
    if subtype == "PCM_16":
        samples = np.clip(samples, -1.0, 1.0)
    sf.write(str(path), samples, clip.sample_rate_hz, subtype=subtype)
