"""
Proyecto TagShield - Etiquetado Musical Robusto al Ruido

TagShield entrena etiquetadores musicales sobre forma de onda cruda que
conservan su rendimiento cuando la música llega mezclada con ruido. Combina
un preentrenamiento contrastivo del extractor de características, un
clasificador de dominio limpio/ruidoso y un ajuste fino adversarial con
inversión de gradiente.

Módulos principales:
- signal_forge: Primitivas de audio (RMS, mezcla a SNR, síntesis, E/S)
- corpus: Manifiestos, muestreadores por etapa y conjuntos de evaluación
- netlab: Extractor, clasificador de dominio, predictor de etiquetas y pérdidas
- trainer: Las tres etapas, checkpoints y directorios de ejecución
- evalkit: AUC-ROC y AP macro por condición e informes
- types: Definiciones de tipos y modelos de datos
"""

from .config import load_run_config
from .errors import TagShieldError, TagShieldRuntimeError, TagShieldValidationError
from .evalkit import average_precision, evaluate, macro_over_tags, roc_auc
from .mappers import config_to_dict, validate_run_config
from .netlab import ModelParams, build_model
from .trainer import Checkpoint, RunDirectory, Trainer, TrainingCorpus
from .types import (
    AudioClip,
    Batch,
    Domain,
    EvalCondition,
    EvalReport,
    EvalSet,
    ExperimentSetting,
    NoiseRecord,
    RunConfig,
    SettingName,
    Split,
    StageName,
    SynthSpec,
    TrackRecord,
    TwoViewBatch,
)

__all__ = [
    # Tipos
    "AudioClip",
    "SynthSpec",
    "TrackRecord",
    "NoiseRecord",
    "Domain",
    "Split",
    "SettingName",
    "StageName",
    "ExperimentSetting",
    "EvalCondition",
    "EvalSet",
    "EvalReport",
    "TwoViewBatch",
    "Batch",
    "RunConfig",
    # Errores
    "TagShieldError",
    "TagShieldValidationError",
    "TagShieldRuntimeError",
    # Configuración
    "load_run_config",
    "validate_run_config",
    "config_to_dict",
    # Clases principales
    "ModelParams",
    "build_model",
    "Trainer",
    "TrainingCorpus",
    "Checkpoint",
    "RunDirectory",
    # Métricas
    "roc_auc",
    "average_precision",
    "macro_over_tags",
    "evaluate",
]

__version__ = "1.0.1"
__author__ = "TagShield Project"
__description__ = "Etiquetado musical robusto al ruido con entrenamiento adversarial de dominio"
