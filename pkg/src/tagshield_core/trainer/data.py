"""
Datos de Entrenamiento - Manifiestos Resueltos para una Configuración
"""

import logging
from dataclasses import dataclass
from pathlib import Path

from ..corpus import CachedClipStore, ClipStore, load_manifest, load_noise_manifest
from ..errors import MissingTags
from ..types import NoiseRecord, RunConfig, SettingName, Split, TrackRecord

logger = logging.getLogger(__name__)


def _require(path: Path) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"No existe el manifiesto {path}")
    return path


@dataclass(frozen=True)
class TrainingCorpus:
    """
    Registros que consume el entrenamiento. En oracle el conjunto de
    entrenamiento viene del manifiesto con objetivo etiquetado; en el resto,
    del manifiesto sin etiquetas de objetivo.
    """

    store: ClipStore
    train: tuple[TrackRecord, ...]
    extra: tuple[TrackRecord, ...]
    valid: tuple[TrackRecord, ...]
    noise_train: tuple[NoiseRecord, ...]
    noise_valid: tuple[NoiseRecord, ...]

    @classmethod
    def from_config(cls, config: RunConfig, store: ClipStore | None = None) -> "TrainingCorpus":
        paths = config.manifests
        train_path = paths.train_oracle if config.setting is SettingName.oracle else paths.train
        extra: list[TrackRecord] = []
        if config.setting is SettingName.proposed_b:
            extra = load_manifest(_require(paths.extra), config.n_tags)
        corpus = cls(
            store=store or CachedClipStore(config.sample_rate_hz),
            train=tuple(load_manifest(_require(train_path), config.n_tags)),
            extra=tuple(extra),
            valid=tuple(load_manifest(_require(paths.valid), config.n_tags)),
            noise_train=tuple(load_noise_manifest(_require(paths.noise_train))),
            noise_valid=tuple(load_noise_manifest(_require(paths.noise_valid))),
        )
        logger.info(
            "Corpus: %d pistas de entrenamiento, %d extra, %d de validación",
            len(corpus.train),
            len(corpus.extra),
            len(corpus.valid),
        )
        return corpus

    @property
    def train_split(self) -> list[TrackRecord]:
        return [record for record in self.train if record.split is Split.train]

    @property
    def tagged_valid(self) -> list[TrackRecord]:
        """Pistas de validación; todas deben estar etiquetadas."""
        untagged = [record.id for record in self.valid if record.tags is None]
        if untagged:
            raise MissingTags(f"Pistas de validación sin etiquetas: {untagged[:5]}")
        return list(self.valid)
