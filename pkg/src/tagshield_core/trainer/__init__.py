"""
Paquete Trainer - Etapas de Entrenamiento, Checkpoints y Ejecuciones

Componentes disponibles:
- Trainer: Coordinador de las tres etapas con parada temprana y reanudación
- plan_for: Plan declarativo de cada etapa (qué se entrena y qué se congela)
- Checkpoint: Contenedor versionado con suma de verificación
- RunDirectory: Directorio de un experimento (configuración, métricas, checkpoints)
"""

from .checkpoint import (
    Checkpoint,
    EarlyStopState,
    config_fingerprint,
    load_checkpoint,
    save_checkpoint,
)
from .data import TrainingCorpus
from .plans import EARLY_STOP_METRIC, plan_for, stages_for, validate_plan
from .run_dir import MetricsLog, RunDirectory
from .steps import FinetuneTerms, contrastive_loss, domain_loss, finetune_terms
from .trainer import (
    StageResult,
    Trainer,
    load_group,
    resume,
    run_stage1,
    run_stage2,
    run_stage3,
)

__all__ = [
    "Trainer",
    "StageResult",
    "TrainingCorpus",
    "run_stage1",
    "run_stage2",
    "run_stage3",
    "resume",
    "load_group",
    "plan_for",
    "validate_plan",
    "stages_for",
    "EARLY_STOP_METRIC",
    "Checkpoint",
    "EarlyStopState",
    "config_fingerprint",
    "load_checkpoint",
    "save_checkpoint",
    "RunDirectory",
    "MetricsLog",
    "FinetuneTerms",
    "contrastive_loss",
    "domain_loss",
    "finetune_terms",
]
