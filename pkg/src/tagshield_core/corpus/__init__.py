"""
Paquete de Corpus - Manifiestos, Muestreo y Conjuntos de Evaluación

Provee la gestión declarativa del corpus: lectura y escritura de
manifiestos, resolución de audio con caché, muestreadores de lotes por
etapa, conjuntos de evaluación congelados y el corpus sintético de
escritorio.

Componentes disponibles:
- ClipStore: Interfaz abstracta para resolver el audio de un registro
- CachedClipStore: Resolución de archivos y síntesis con caché LRU
- Stage1Sampler / Stage23Sampler: Lotes de cada etapa de entrenamiento
- Prefetcher: Precarga de lotes en un hilo productor
"""

from .evaluation_sets import build_domain_probe_set, build_eval_set
from .manifest import load_manifest, load_noise_manifest, read_manifest, write_manifest
from .prefetch import Prefetcher
from .sampling import (
    SamplingOptions,
    Stage1Sampler,
    Stage23Sampler,
    check_setting_records,
    sample_stage1_batch,
    sample_stage23_batch,
)
from .store import CachedClipStore, ClipStore
from .synthetic import TAG_NAMES, DeskCorpus, build_desk_records, generate_desk_corpus, tags_for_spec

__all__ = [
    "ClipStore",
    "CachedClipStore",
    "read_manifest",
    "load_manifest",
    "load_noise_manifest",
    "write_manifest",
    "SamplingOptions",
    "Stage1Sampler",
    "Stage23Sampler",
    "check_setting_records",
    "sample_stage1_batch",
    "sample_stage23_batch",
    "build_eval_set",
    "build_domain_probe_set",
    "Prefetcher",
    "TAG_NAMES",
    "DeskCorpus",
    "build_desk_records",
    "generate_desk_corpus",
    "tags_for_spec",
]
