"""
Paquete Netlab - Modelos, Pérdidas e Inversión de Gradiente

Define los tres componentes del sistema (FE, DC y LP), las pérdidas de cada
etapa y el mecanismo de inversión de gradiente del que depende el
entrenamiento adversarial.
"""

from .grl import GradientReversal, GradientReverse, gradient_reverse
from .losses import bce_logits_loss, bce_loss, ntxent_loss, total_loss
from .modules import (
    DomainClassifier,
    Encoder,
    FeatureExtractor,
    LabelPredictor,
    ModelParams,
    Projector,
    as_input,
    build_model,
    dc_forward,
    fe_forward,
    lp_forward,
    projector_forward,
)
from .params import count_parameters, param_checksum, set_frozen

__all__ = [
    "Encoder",
    "Projector",
    "FeatureExtractor",
    "DomainClassifier",
    "LabelPredictor",
    "ModelParams",
    "build_model",
    "as_input",
    "fe_forward",
    "projector_forward",
    "dc_forward",
    "lp_forward",
    "ntxent_loss",
    "bce_loss",
    "bce_logits_loss",
    "total_loss",
    "GradientReverse",
    "GradientReversal",
    "gradient_reverse",
    "param_checksum",
    "set_frozen",
    "count_parameters",
]
