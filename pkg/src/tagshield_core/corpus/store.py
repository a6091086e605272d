"""
Almacén de Clips - Interfaz Abstracta y Caché en Memoria

Este módulo define la interfaz para resolver la fuente de un registro
(archivo WAV o especificación de síntesis) en un AudioClip, y una
implementación con caché compartible entre hilos.
"""

import logging
import threading
from abc import ABC, abstractmethod
from collections import OrderedDict
from pathlib import Path

from ..signal_forge import load_wav, resample, synthesize
from ..types import DEFAULT_SAMPLE_RATE_HZ, AudioClip, NoiseRecord, SynthSpec, TrackRecord

logger = logging.getLogger(__name__)


class ClipStore(ABC):
    """
    Interfaz abstracta para obtener el audio de los registros del corpus.
    Los clips devueltos son inmutables y pueden compartirse.
    """

    @abstractmethod
    def load_track(self, record: TrackRecord) -> AudioClip:
        """Devuelve el audio de una pista."""
        pass

    @abstractmethod
    def load_noise(self, record: NoiseRecord) -> AudioClip:
        """Devuelve el audio de un ruido."""
        pass

    @abstractmethod
    def clear(self) -> None:
        """Libera los clips en memoria."""
        pass


class CachedClipStore(ClipStore):
    """
    Resuelve fuentes de archivo (con remuestreo al cargar) o de síntesis, y
    guarda los clips más recientes en una caché LRU protegida por un cerrojo.
    """

    def __init__(
        self,
        sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ,
        max_items: int = 4096,
    ) -> None:
        self.sample_rate_hz: int = sample_rate_hz
        self.max_items: int = max_items
        self._cache: OrderedDict[Path | str, AudioClip] = OrderedDict()
        self._lock = threading.Lock()

    def load_track(self, record: TrackRecord) -> AudioClip:
        return self._load(record.source)

    def load_noise(self, record: NoiseRecord) -> AudioClip:
        return self._load(record.source)

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def _key(self, source: Path | SynthSpec) -> Path | str:
        # Los diccionarios de parámetros no son hashables: se usa su repr ordenado
        if isinstance(source, SynthSpec):
            params = sorted(source.params.items())
            return repr(
                (source.kind, source.seed, source.duration_s, params, source.sample_rate_hz)
            )
        return source

    def _load(self, source: Path | SynthSpec) -> AudioClip:
        key = self._key(source)
        with self._lock:
            clip = self._cache.get(key)
            if clip is not None:
                self._cache.move_to_end(key)
                return clip

        if isinstance(source, SynthSpec):
            clip = synthesize(source)
            if clip.sample_rate_hz != self.sample_rate_hz:
                clip = resample(clip, self.sample_rate_hz)
        else:
            logger.debug("Cargando audio %s", source)
            clip = load_wav(source, self.sample_rate_hz)

        with self._lock:
            self._cache[key] = clip
            while len(self._cache) > self.max_items:
                self._cache.popitem(last=False)
        return clip
