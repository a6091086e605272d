"""
Corpus Sintético de Escritorio - Pistas Armónicas Etiquetadas y Ruidos

Genera un corpus completo y determinista: pistas musicales cuyas etiquetas
se derivan de sus parámetros de síntesis (banda de la fundamental, riqueza
armónica y envolvente) y tres conjuntos de ruido disjuntos. Los ruidos de
entrenamiento y validación son estacionarios con pendiente espectral; los de
prueba son ráfagas tipo aplauso o multitud que nunca aparecen en validación.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from tqdm import tqdm

from ..errors import BadSpec, ConfigError
from ..signal_forge import save_wav, synthesize
from ..types import (
    DEFAULT_SAMPLE_RATE_HZ,
    Domain,
    ManifestKind,
    ManifestPaths,
    NoiseRecord,
    Split,
    SynthConfig,
    SynthKind,
    SynthSpec,
    TrackRecord,
)
from .manifest import write_manifest

logger = logging.getLogger(__name__)

TAG_NAMES: tuple[str, ...] = (
    "f0_low",
    "f0_mid",
    "f0_high",
    "harmonics_sparse",
    "harmonics_rich",
    "envelope_steady",
    "envelope_pulse",
    "envelope_swell",
)

F0_BANDS_HZ: dict[str, tuple[float, float]] = {
    "low": (90.0, 145.0),
    "mid": (180.0, 290.0),
    "high": (360.0, 580.0),
}
HARMONIC_CLASSES: dict[str, tuple[int, int]] = {
    "sparse": (2, 4),
    "rich": (8, 12),
}
ENVELOPE_CLASSES: tuple[str, ...] = ("steady", "pulse", "swell")
NOISE_TILTS_DB_PER_OCTAVE: tuple[float, ...] = (0.0, -3.0, -6.0)


def _band_of(value: float, bands: dict[str, tuple[float, float]]) -> str | None:
    for name, (low, high) in bands.items():
        if low <= value <= high:
            return name
    return None


def tags_for_spec(spec: SynthSpec) -> tuple[int, ...]:
    """
    Vector de etiquetas de una pista sintética, derivado de los parámetros
    explícitos de su especificación.
    """
    if spec.kind is not SynthKind.music:
        raise BadSpec("Solo las pistas musicales llevan etiquetas")
    try:
        f0 = float(spec.params["fundamental_hz"])
        n_harmonics = int(spec.params["n_harmonics"])
        envelope = str(spec.params["envelope"])
    except KeyError as exc:
        raise BadSpec(f"Falta el parámetro {exc} para derivar etiquetas") from None

    band = _band_of(f0, F0_BANDS_HZ)
    richness = next(
        (name for name, (low, high) in HARMONIC_CLASSES.items() if low <= n_harmonics <= high),
        None,
    )
    if band is None or richness is None or envelope not in ENVELOPE_CLASSES:
        raise BadSpec(f"Parámetros fuera de las clases etiquetables: {spec.params}")
    active = {f"f0_{band}", f"harmonics_{richness}", f"envelope_{envelope}"}
    return tuple(int(name in active) for name in TAG_NAMES)


def _music_spec(
    rng: np.random.Generator, duration_s: float, sample_rate_hz: int
) -> SynthSpec:
    band = list(F0_BANDS_HZ)[int(rng.integers(len(F0_BANDS_HZ)))]
    richness = list(HARMONIC_CLASSES)[int(rng.integers(len(HARMONIC_CLASSES)))]
    envelope = ENVELOPE_CLASSES[int(rng.integers(len(ENVELOPE_CLASSES)))]
    low, high = HARMONIC_CLASSES[richness]
    params = {
        "fundamental_hz": round(float(rng.uniform(*F0_BANDS_HZ[band])), 3),
        "n_harmonics": int(rng.integers(low, high + 1)),
        "envelope": envelope,
    }
    return SynthSpec(
        kind=SynthKind.music,
        seed=int(rng.integers(2**63)),
        duration_s=duration_s,
        params=params,
        sample_rate_hz=sample_rate_hz,
    )


def _noise_spec(
    rng: np.random.Generator, index: int, burst: bool, duration_s: float, sample_rate_hz: int
) -> SynthSpec:
    params: dict[str, float | bool] = {
        "tilt_db_per_octave": NOISE_TILTS_DB_PER_OCTAVE[index % len(NOISE_TILTS_DB_PER_OCTAVE)]
    }
    if burst:
        params["burst"] = True
        params["burst_rate_hz"] = round(float(rng.uniform(3.0, 6.0)), 3)
    return SynthSpec(
        kind=SynthKind.noise,
        seed=int(rng.integers(2**63)),
        duration_s=duration_s,
        params=params,
        sample_rate_hz=sample_rate_hz,
    )


@dataclass(frozen=True)
class DeskCorpus:
    """Registros generados y rutas de los manifiestos escritos."""

    tracks: tuple[TrackRecord, ...]
    oracle_tracks: tuple[TrackRecord, ...]
    extra: tuple[TrackRecord, ...]
    noises: tuple[NoiseRecord, ...]
    manifests: ManifestPaths

    def split(self, split: Split) -> list[TrackRecord]:
        return [record for record in self.tracks if record.split is split]


def _split_counts(config: SynthConfig) -> tuple[int, int, int]:
    n_test = round(config.n_tracks * config.test_fraction)
    n_valid = round(config.n_tracks * config.valid_fraction)
    n_train = config.n_tracks - n_test - n_valid
    if n_train < 2 or n_valid < 1 or n_test < 1:
        raise ConfigError(
            f"n_tracks={config.n_tracks} no alcanza para entrenamiento, validación y prueba"
        )
    return n_train, n_valid, n_test


def build_desk_records(
    config: SynthConfig, seed: int, sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ
) -> DeskCorpus:
    """
    Registros del corpus con fuentes SynthSpec, sin tocar el disco. Todas las
    semillas derivan del generador maestro en un orden fijo.
    """
    n_train, n_valid, n_test = _split_counts(config)
    if config.n_noises < 3:
        raise ConfigError("n_noises debe ser al menos 3 (entrenamiento, validación y prueba)")
    rng = np.random.default_rng(seed)

    splits = [Split.train] * n_train + [Split.valid] * n_valid + [Split.test] * n_test
    n_target = round(n_train * config.target_fraction)
    tracks: list[TrackRecord] = []
    oracle: list[TrackRecord] = []
    for index, split in enumerate(splits):
        spec = _music_spec(rng, config.track_duration_s, sample_rate_hz)
        tags = tags_for_spec(spec)
        is_target = split is Split.train and index >= n_train - n_target
        domain = Domain.target if is_target else Domain.source
        track = TrackRecord(
            id=f"trk-{index:05d}",
            source=spec,
            domain=domain,
            split=split,
            tags=None if is_target else tags,
        )
        tracks.append(track)
        oracle.append(TrackRecord(track.id, spec, domain, split, tags))

    extra = [
        TrackRecord(
            id=f"xtr-{index:05d}",
            source=_music_spec(rng, config.track_duration_s, sample_rate_hz),
            domain=Domain.target,
            split=Split.train,
        )
        for index in range(config.n_extra)
    ]

    per_pool = config.n_noises // 3
    pools = [Split.train] * (config.n_noises - 2 * per_pool) + [Split.valid] * per_pool
    pools += [Split.test] * per_pool
    noises = [
        NoiseRecord(
            id=f"nse-{index:05d}",
            source=_noise_spec(
                rng, index, split is Split.test, config.noise_duration_s, sample_rate_hz
            ),
            split=split,
        )
        for index, split in enumerate(pools)
    ]

    output = config.output_dir
    return DeskCorpus(
        tracks=tuple(tracks),
        oracle_tracks=tuple(oracle),
        extra=tuple(extra),
        noises=tuple(noises),
        manifests=ManifestPaths(
            train=output / "train.jsonl",
            train_oracle=output / "train_oracle.jsonl",
            extra=output / "extra.jsonl",
            valid=output / "valid.jsonl",
            test=output / "test.jsonl",
            noise_train=output / "noise_train.jsonl",
            noise_valid=output / "noise_valid.jsonl",
            noise_test=output / "noise_test.jsonl",
        ),
    )


def _materialize[R: (TrackRecord, NoiseRecord)](
    records: tuple[R, ...], audio_dir: Path, progress: bool
) -> dict[str, Path]:
    """Sintetiza cada fuente a WAV flotante de 32 bits; devuelve id -> ruta."""
    paths: dict[str, Path] = {}
    for record in tqdm(records, desc="Sintetizando", disable=not progress, leave=False):
        assert isinstance(record.source, SynthSpec)
        path = audio_dir / f"{record.id}.wav"
        save_wav(synthesize(record.source), path, subtype="FLOAT")
        paths[record.id] = path.resolve()
    return paths


def generate_desk_corpus(
    config: SynthConfig,
    seed: int,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ,
    progress: bool = False,
) -> DeskCorpus:
    """
    Genera el corpus y escribe sus manifiestos en `config.output_dir`. Con
    `write_audio` las fuentes se sintetizan a `audio/{id}.wav` y los
    manifiestos apuntan a esos archivos; si no, guardan la especificación.
    """
    corpus = build_desk_records(config, seed, sample_rate_hz)
    tracks, oracle, extra, noises = (
        corpus.tracks,
        corpus.oracle_tracks,
        corpus.extra,
        corpus.noises,
    )
    if config.write_audio:
        audio_dir = config.output_dir / "audio"
        paths = _materialize(tracks + extra, audio_dir, progress)
        paths |= _materialize(noises, audio_dir, progress)
        tracks = tuple(_with_path(r, paths) for r in tracks)
        oracle = tuple(_with_path(r, paths) for r in oracle)
        extra = tuple(_with_path(r, paths) for r in extra)
        noises = tuple(NoiseRecord(n.id, paths[n.id], n.split) for n in noises)

    paths_out = corpus.manifests
    n_tags = len(TAG_NAMES)
    train = [r for r in tracks if r.split is Split.train]
    train_oracle = [r for r in oracle if r.split is Split.train]
    write_manifest(paths_out.train, train, ManifestKind.tracks, n_tags, TAG_NAMES)
    write_manifest(paths_out.train_oracle, train_oracle, ManifestKind.tracks, n_tags, TAG_NAMES)
    write_manifest(paths_out.extra, list(extra), ManifestKind.tracks, n_tags, TAG_NAMES)
    for split, path in ((Split.valid, paths_out.valid), (Split.test, paths_out.test)):
        chosen = [r for r in tracks if r.split is split]
        write_manifest(path, chosen, ManifestKind.tracks, n_tags, TAG_NAMES)
    for split, path in (
        (Split.train, paths_out.noise_train),
        (Split.valid, paths_out.noise_valid),
        (Split.test, paths_out.noise_test),
    ):
        chosen_noises = [n for n in noises if n.split is split]
        write_manifest(path, chosen_noises, ManifestKind.noises, n_tags, TAG_NAMES)

    logger.info(
        "Corpus sintético: %d pistas, %d extra, %d ruidos en %s",
        len(tracks),
        len(extra),
        len(noises),
        config.output_dir,
    )
    return DeskCorpus(tracks, oracle, extra, noises, paths_out)


def _with_path(record: TrackRecord, paths: dict[str, Path]) -> TrackRecord:
    return TrackRecord(
        id=record.id,
        source=paths[record.id],
        domain=record.domain,
        split=record.split,
        tags=record.tags,
        noise_refs=record.noise_refs,
    )
