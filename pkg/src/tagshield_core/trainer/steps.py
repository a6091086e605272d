"""
Pasos de Entrenamiento - Pérdidas de Cada Etapa sobre un Lote
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor

from ..netlab import (
    ModelParams,
    as_input,
    bce_logits_loss,
    bce_loss,
    dc_forward,
    fe_forward,
    gradient_reverse,
    lp_forward,
    ntxent_loss,
    projector_forward,
    total_loss,
)
from ..types import Batch, TwoViewBatch


def contrastive_loss(model: ModelParams, batch: TwoViewBatch, temperature: float) -> Tensor:
    """Etapa 1: NT-Xent entre las proyecciones de ambas vistas."""
    projections_a = projector_forward(model, fe_forward(model, batch.views_a))
    projections_b = projector_forward(model, fe_forward(model, batch.views_b))
    return ntxent_loss(projections_a, projections_b, temperature)


def domain_loss(model: ModelParams, batch: Batch) -> tuple[Tensor, float]:
    """Etapa 2: BCE del DC sobre embeddings del FE congelado. Devuelve también la precisión."""
    with torch.no_grad():
        embeddings = torch.cat(
            [fe_forward(model, batch.src_waveforms), fe_forward(model, batch.trg_waveforms)]
        )
    labels = as_input(np.concatenate([batch.src_domain_labels, batch.trg_domain_labels]), model)
    probabilities = dc_forward(model, embeddings)
    accuracy = float(((probabilities > 0.5).to(labels.dtype) == labels).float().mean())
    return bce_loss(probabilities, labels), accuracy


@dataclass(frozen=True)
class FinetuneTerms:
    """Componentes de la pérdida de la etapa 3."""

    total: Tensor
    lp_src: Tensor
    dc_src: Tensor
    dc_trg: Tensor


def finetune_terms(model: ModelParams, batch: Batch, weight: float) -> FinetuneTerms:
    """
    Etapa 3. La mitad objetivo entra en el LP solo si trae etiquetas (oracle)
    y en el DC solo si weight > 0; los embeddings llegan al DC a través de la
    inversión de gradiente, y weight pondera la pérdida del DC.

    Con weight == 0 y sin etiquetas de objetivo, la mitad objetivo no pasa
    por el FE, así que el paso coincide con el de la línea base.
    """
    src_embeddings = fe_forward(model, batch.src_waveforms)
    src_tags = as_input(batch.src_tags, model)
    zero = src_embeddings.new_zeros(())

    has_target = batch.trg_waveforms.shape[0] > 0
    trg_embeddings = None
    if has_target and (weight > 0 or batch.trg_tags is not None):
        trg_embeddings = fe_forward(model, batch.trg_waveforms)

    if trg_embeddings is not None and batch.trg_tags is not None:
        logits = lp_forward(model, torch.cat([src_embeddings, trg_embeddings]))
        tags = torch.cat([src_tags, as_input(batch.trg_tags, model)])
        lp_src = bce_logits_loss(logits, tags)
    else:
        lp_src = bce_logits_loss(lp_forward(model, src_embeddings), src_tags)

    if trg_embeddings is None or weight == 0:
        return FinetuneTerms(total=lp_src, lp_src=lp_src, dc_src=zero, dc_trg=zero)

    src_probabilities = dc_forward(model, gradient_reverse(src_embeddings, 1.0))
    trg_probabilities = dc_forward(model, gradient_reverse(trg_embeddings, 1.0))
    dc_src = bce_loss(src_probabilities, as_input(batch.src_domain_labels, model))
    dc_trg = bce_loss(trg_probabilities, as_input(batch.trg_domain_labels, model))
    return FinetuneTerms(
        total=total_loss(lp_src, dc_src, dc_trg, weight),
        lp_src=lp_src,
        dc_src=dc_src,
        dc_trg=dc_trg,
    )
