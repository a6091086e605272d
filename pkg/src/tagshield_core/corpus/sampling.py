"""
Muestreo de Lotes - Etapa 1 (dos vistas) y Etapas 2/3 (fuente + objetivo)

Los muestreadores mantienen su propio generador aleatorio: se usa uno por
hilo trabajador y nunca se comparten. La mezcla con ruido se hace al vuelo
en cada extracción.
"""

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyPool, InvariantViolation, MissingTags, OverlapViolation, ZeroEnergy
from ..signal_forge import apply_gain_db, fit_length, mix_at_snr, normalize_rms, rms
from ..types import (
    AudioClip,
    Batch,
    Domain,
    ExperimentSetting,
    NoiseRecord,
    RunConfig,
    SettingName,
    Split,
    TrackRecord,
    TwoViewBatch,
)
from .store import ClipStore

logger = logging.getLogger(__name__)

# Intentos para encontrar un recorte con energía (p. ej. ruidos con ráfagas)
MAX_CROP_ATTEMPTS = 8


@dataclass(frozen=True)
class SamplingOptions:
    """Parámetros de aumentación y mezcla compartidos por los muestreadores."""

    input_length: int
    target_rms: float = 0.1
    noise_count: int = 1
    snr_min_db: float = -10.0
    snr_max_db: float = 10.0
    noisy_view_probability: float = 0.5
    gain_jitter_db: float = 3.0
    n_tags: int = 50

    @classmethod
    def from_config(cls, config: RunConfig) -> "SamplingOptions":
        return cls(
            input_length=config.input_length,
            target_rms=config.target_rms,
            noise_count=config.noise_count,
            snr_min_db=config.snr_min_db,
            snr_max_db=config.snr_max_db,
            noisy_view_probability=config.noisy_view_probability,
            gain_jitter_db=config.gain_jitter_db,
            n_tags=config.n_tags,
        )


class NoiseDrawer:
    """Elige ruidos distintos del conjunto y recorta segmentos con energía."""

    def __init__(self, store: ClipStore, noises: Sequence[NoiseRecord]) -> None:
        self.store: ClipStore = store
        self.noises: list[NoiseRecord] = list(noises)
        self._by_id: dict[str, NoiseRecord] = {noise.id: noise for noise in self.noises}

    def segment(self, record: NoiseRecord, n_samples: int, rng: np.random.Generator) -> AudioClip:
        clip = self.store.load_noise(record)
        for _ in range(MAX_CROP_ATTEMPTS):
            segment = fit_length(clip, n_samples, rng=rng)
            if rms(segment) > 0:
                return segment
        raise ZeroEnergy(f"El ruido '{record.id}' no tiene segmentos con energía")

    def draw(
        self, count: int, n_samples: int, rng: np.random.Generator, refs: Sequence[str] = ()
    ) -> list[AudioClip]:
        """`count` ruidos distintos si el conjunto alcanza; `refs` fija la elección."""
        if refs:
            missing = [ref for ref in refs if ref not in self._by_id]
            if missing:
                raise InvariantViolation(f"ruidos desconocidos: {missing}")
            chosen = [self._by_id[ref] for ref in refs]
        else:
            if not self.noises:
                raise EmptyPool("El conjunto de ruidos está vacío")
            replace = len(self.noises) < count
            indices = rng.choice(len(self.noises), size=count, replace=replace)
            chosen = [self.noises[int(index)] for index in indices]
        return [self.segment(record, n_samples, rng) for record in chosen]


def music_crop(
    store: ClipStore, record: TrackRecord, n_samples: int, rng: np.random.Generator
) -> AudioClip:
    """Recorte aleatorio con energía de una pista."""
    clip = store.load_track(record)
    for _ in range(MAX_CROP_ATTEMPTS):
        crop = fit_length(clip, n_samples, rng=rng)
        if rms(crop) > 0:
            return crop
    raise ZeroEnergy(f"La pista '{record.id}' no tiene segmentos con energía")


def noisy_mixture(
    crop: AudioClip,
    drawer: NoiseDrawer,
    options: SamplingOptions,
    rng: np.random.Generator,
    refs: Sequence[str] = (),
) -> AudioClip:
    """Mezcla el recorte con `noise_count` ruidos a una SNR uniforme en el rango."""
    snr_db = float(rng.uniform(options.snr_min_db, options.snr_max_db))
    noises = drawer.draw(options.noise_count, len(crop), rng, refs)
    return mix_at_snr(crop, noises, snr_db)


class Stage1Sampler:
    """
    Lotes de dos vistas para el preentrenamiento contrastivo: recortes
    aleatorios independientes de la misma pista, cada uno mezclado con ruido
    con probabilidad `noisy_view_probability` y con una ganancia aleatoria.
    """

    def __init__(
        self,
        store: ClipStore,
        records: Sequence[TrackRecord],
        noises: Sequence[NoiseRecord],
        options: SamplingOptions,
    ) -> None:
        if not records:
            raise EmptyPool("No hay pistas para el preentrenamiento del FE")
        self.store: ClipStore = store
        self.records: list[TrackRecord] = list(records)
        self.drawer = NoiseDrawer(store, noises)
        self.options: SamplingOptions = options

    def _view(self, record: TrackRecord, rng: np.random.Generator) -> tuple[AudioClip, bool]:
        options = self.options
        view = normalize_rms(
            music_crop(self.store, record, options.input_length, rng), options.target_rms
        )
        noisy = bool(rng.random() < options.noisy_view_probability)
        if noisy:
            view = noisy_mixture(view, self.drawer, options, rng)
        gain_db = float(rng.uniform(-options.gain_jitter_db, options.gain_jitter_db))
        return apply_gain_db(view, gain_db), noisy

    def batch_from(self, indices: Sequence[int], rng: np.random.Generator) -> TwoViewBatch:
        views_a, views_b, noisy_a, noisy_b = [], [], [], []
        for index in indices:
            record = self.records[int(index)]
            view, noisy = self._view(record, rng)
            views_a.append(view.samples)
            noisy_a.append(noisy)
            view, noisy = self._view(record, rng)
            views_b.append(view.samples)
            noisy_b.append(noisy)
        return TwoViewBatch(
            views_a=np.stack(views_a).astype(np.float32),
            views_b=np.stack(views_b).astype(np.float32),
            track_ids=tuple(self.records[int(index)].id for index in indices),
            noisy_a=np.array(noisy_a, dtype=np.bool_),
            noisy_b=np.array(noisy_b, dtype=np.bool_),
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> TwoViewBatch:
        """Un lote de pistas distintas (con reemplazo solo si el conjunto es pequeño)."""
        replace = len(self.records) < batch_size
        indices = rng.choice(len(self.records), size=batch_size, replace=replace)
        return self.batch_from(indices.tolist(), rng)

    def batches_per_epoch(self, batch_size: int) -> int:
        """Lotes que produce `epoch`: el resto solo cuenta si tiene al menos 2 pistas."""
        full, rest = divmod(len(self.records), batch_size)
        return full + (1 if rest >= 2 else 0)

    def epoch(self, batch_size: int, rng: np.random.Generator) -> Iterator[TwoViewBatch]:
        """Una pasada por el conjunto en orden aleatorio; se descartan lotes de < 2."""
        order = rng.permutation(len(self.records)).tolist()
        for start in range(0, len(order), batch_size):
            chunk = order[start : start + batch_size]
            if len(chunk) < 2:
                break
            yield self.batch_from(chunk, rng)


def sample_stage1_batch(
    store: ClipStore,
    records: Sequence[TrackRecord],
    noises: Sequence[NoiseRecord],
    batch_size: int,
    rng: np.random.Generator,
    options: SamplingOptions,
) -> TwoViewBatch:
    """Atajo funcional sobre Stage1Sampler."""
    return Stage1Sampler(store, records, noises, options).sample(batch_size, rng)


def check_setting_records(
    records: Sequence[TrackRecord], setting: ExperimentSetting
) -> None:
    """
    En las configuraciones propuestas ningún registro objetivo puede llevar
    etiquetas; en oracle todos deben llevarlas.
    """
    for record in records:
        if record.domain is not Domain.target:
            continue
        if setting.target_tagged and record.tags is None:
            raise MissingTags(f"oracle requiere etiquetas en el objetivo: '{record.id}'")
        if not setting.target_tagged and record.tags is not None:
            raise InvariantViolation(
                f"la configuración {setting.name.value} no admite etiquetas en el objetivo",
                record.id,
            )


class Stage23Sampler:
    """
    Lotes de las etapas 2 y 3. La mitad fuente sale de pistas limpias
    etiquetadas; la mitad objetivo, del conjunto objetivo disjunto (más el
    conjunto extra en proposed_b), mezclada al vuelo con ruido.
    """

    def __init__(
        self,
        store: ClipStore,
        records: Sequence[TrackRecord],
        setting: ExperimentSetting,
        noises: Sequence[NoiseRecord],
        options: SamplingOptions,
        extra_records: Sequence[TrackRecord] = (),
    ) -> None:
        train = [record for record in records if record.split is Split.train]
        self.source_pool: list[TrackRecord] = [
            record for record in train if record.domain is Domain.source
        ]
        target_pool = [record for record in train if record.domain is Domain.target]
        if setting.name is SettingName.proposed_b:
            target_pool += list(extra_records)
        self.target_pool: list[TrackRecord] = target_pool if setting.uses_target else []
        check_setting_records(self.target_pool, setting)

        if not self.source_pool:
            raise EmptyPool("No hay pistas fuente etiquetadas para entrenar")
        untagged = [record.id for record in self.source_pool if record.tags is None]
        if untagged:
            raise MissingTags(f"Pistas fuente sin etiquetas: {untagged[:5]}")
        if setting.uses_target and not self.target_pool:
            raise EmptyPool("El conjunto objetivo está vacío")
        overlap = {r.id for r in self.source_pool} & {r.id for r in self.target_pool}
        if overlap:
            raise OverlapViolation(f"Ids en ambos dominios: {sorted(overlap)[:5]}")

        self.store: ClipStore = store
        self.setting: ExperimentSetting = setting
        self.drawer = NoiseDrawer(store, noises)
        self.options: SamplingOptions = options

    def _source_half(
        self, indices: Sequence[int], rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
        length, target = self.options.input_length, self.options.target_rms
        chosen = [self.source_pool[int(index)] for index in indices]
        waveforms = [
            normalize_rms(music_crop(self.store, record, length, rng), target).samples
            for record in chosen
        ]
        tags = [record.tags for record in chosen]
        return (
            np.stack(waveforms).astype(np.float32),
            np.asarray(tags, dtype=np.float32),
            tuple(record.id for record in chosen),
        )

    def _target_half(
        self, batch_size: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray | None, tuple[str, ...]]:
        length = self.options.input_length
        if not self.setting.uses_target:
            return np.zeros((0, length), dtype=np.float32), None, ()
        # Con reemplazo: una época es una pasada por el conjunto fuente
        indices = rng.integers(0, len(self.target_pool), size=batch_size)
        chosen = [self.target_pool[int(index)] for index in indices]
        waveforms = []
        for record in chosen:
            crop = normalize_rms(
                music_crop(self.store, record, length, rng), self.options.target_rms
            )
            mixed = noisy_mixture(crop, self.drawer, self.options, rng, record.noise_refs)
            waveforms.append(mixed.samples)
        tags = None
        if self.setting.target_tagged:
            tags = np.asarray([record.tags for record in chosen], dtype=np.float32)
        return np.stack(waveforms).astype(np.float32), tags, tuple(r.id for r in chosen)

    def batch_from(
        self,
        indices: Sequence[int],
        src_rng: np.random.Generator,
        trg_rng: np.random.Generator,
    ) -> Batch:
        src_waveforms, src_tags, src_ids = self._source_half(indices, src_rng)
        trg_waveforms, trg_tags, trg_ids = self._target_half(len(indices), trg_rng)
        if set(src_ids) & set(trg_ids):
            raise OverlapViolation(f"Ids repetidos entre mitades: {set(src_ids) & set(trg_ids)}")
        return Batch(
            src_waveforms=src_waveforms,
            src_tags=src_tags,
            src_domain_labels=np.zeros(len(src_ids), dtype=np.float32),
            src_ids=src_ids,
            trg_waveforms=trg_waveforms,
            trg_domain_labels=np.ones(len(trg_ids), dtype=np.float32),
            trg_ids=trg_ids,
            trg_tags=trg_tags,
        )

    def sample(
        self,
        batch_size: int,
        src_rng: np.random.Generator,
        trg_rng: np.random.Generator | None = None,
    ) -> Batch:
        replace = len(self.source_pool) < batch_size
        indices = src_rng.choice(len(self.source_pool), size=batch_size, replace=replace)
        return self.batch_from(indices.tolist(), src_rng, trg_rng or src_rng)

    def batches_per_epoch(self, batch_size: int) -> int:
        """Lotes que produce `epoch` con este tamaño de lote."""
        n = len(self.source_pool)
        if n <= batch_size:
            return 1 if n >= 2 else 0
        return n // batch_size

    def epoch(
        self,
        batch_size: int,
        src_rng: np.random.Generator,
        trg_rng: np.random.Generator,
    ) -> Iterator[Batch]:
        """
        Una pasada por el conjunto fuente. El último lote incompleto se
        descarta salvo que sea el único (la normalización por lotes necesita >= 2).
        """
        order = src_rng.permutation(len(self.source_pool)).tolist()
        chunks = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
        if len(chunks) > 1 and len(chunks[-1]) < batch_size:
            chunks.pop()
        for chunk in chunks:
            if len(chunk) >= 2:
                yield self.batch_from(chunk, src_rng, trg_rng)


def sample_stage23_batch(
    store: ClipStore,
    records: Sequence[TrackRecord],
    setting: ExperimentSetting,
    noises: Sequence[NoiseRecord],
    batch_size: int,
    rng: np.random.Generator,
    options: SamplingOptions,
    extra_records: Sequence[TrackRecord] = (),
) -> Batch:
    """Atajo funcional: las mitades fuente y objetivo usan flujos derivados de `rng`."""
    sampler = Stage23Sampler(store, records, setting, noises, options, extra_records)
    src_rng, trg_rng = rng.spawn(2)
    return sampler.sample(batch_size, src_rng, trg_rng)
