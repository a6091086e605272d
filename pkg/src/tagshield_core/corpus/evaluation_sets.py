"""
Conjuntos de Evaluación - Pistas x Condiciones Congeladas por Semilla

Cada pista aparece una vez por condición. El desplazamiento del recorte
depende solo de (semilla, pista) y la elección de ruidos de
(semilla, pista, condición), así que dos construcciones con la misma semilla
son idénticas bit a bit y no dependen del orden de evaluación.
"""

from collections.abc import Sequence

import numpy as np

from ..errors import EmptyPool, MissingTags
from ..signal_forge import mix_at_snr, normalize_rms
from ..types import DomainProbeSet, EvalCondition, EvalItem, EvalSet, NoiseRecord, TrackRecord
from .sampling import NoiseDrawer, music_crop
from .store import ClipStore


def _check_tagged(records: Sequence[TrackRecord]) -> None:
    if not records:
        raise EmptyPool("No hay pistas para evaluar")
    untagged = [record.id for record in records if record.tags is None]
    if untagged:
        raise MissingTags(f"La evaluación requiere etiquetas; faltan en {untagged[:5]}")


def build_eval_set(
    store: ClipStore,
    records: Sequence[TrackRecord],
    noises: Sequence[NoiseRecord],
    conditions: Sequence[EvalCondition],
    rng_seed: int,
    input_length: int,
    noise_count: int = 1,
) -> EvalSet:
    """
    Construye el conjunto congelado. Los elementos limpios son el recorte
    sin normalizar; los ruidosos mezclan ese mismo recorte a la SNR de la
    condición.
    """
    _check_tagged(records)
    drawer = NoiseDrawer(store, noises)
    items: list[EvalItem] = []
    for i, record in enumerate(records):
        crop = music_crop(store, record, input_length, np.random.default_rng([rng_seed, i]))
        tags = np.asarray(record.tags, dtype=np.float32)
        for j, condition in enumerate(conditions):
            if condition.snr_db is None:
                waveform = crop.samples
            else:
                rng = np.random.default_rng([rng_seed, i, j])
                count = len(record.noise_refs) or noise_count
                chosen = drawer.draw(count, input_length, rng, record.noise_refs)
                waveform = mix_at_snr(crop, chosen, condition.snr_db).samples
            items.append(
                EvalItem(track_id=record.id, waveform=waveform, tags=tags, condition=condition)
            )
    return EvalSet(items=tuple(items), conditions=tuple(conditions), seed=rng_seed)


def build_domain_probe_set(
    store: ClipStore,
    records: Sequence[TrackRecord],
    noises: Sequence[NoiseRecord],
    rng_seed: int,
    input_length: int,
    target_rms: float = 0.1,
    noise_count: int = 1,
    snr_range_db: tuple[float, float] = (-10.0, 10.0),
) -> DomainProbeSet:
    """
    Conjunto balanceado para la sonda de dominio: por cada pista, un recorte
    limpio normalizado (etiqueta 0) y otro recorte mezclado con ruido a una
    SNR aleatoria (etiqueta 1). No necesita etiquetas de tags.
    """
    if not records:
        raise EmptyPool("No hay pistas para la sonda de dominio")
    drawer = NoiseDrawer(store, noises)
    waveforms: list[np.ndarray] = []
    labels: list[float] = []
    for i, record in enumerate(records):
        rng = np.random.default_rng([rng_seed, i])
        clean = normalize_rms(music_crop(store, record, input_length, rng), target_rms)
        noisy = normalize_rms(music_crop(store, record, input_length, rng), target_rms)
        snr_db = float(rng.uniform(*snr_range_db))
        chosen = drawer.draw(noise_count, input_length, rng)
        noisy = mix_at_snr(noisy, chosen, snr_db)
        waveforms += [clean.samples, noisy.samples]
        labels += [0.0, 1.0]
    return DomainProbeSet(
        waveforms=np.stack(waveforms).astype(np.float32),
        domain_labels=np.asarray(labels, dtype=np.float32),
    )
