"""
Funciones de Pérdida - Contrastiva, Entropía Cruzada Binaria y Total

- ntxent_loss: NT-Xent sobre 2N filas de similitud coseno, sin auto-pares
- bce_loss / bce_logits_loss: entropía cruzada binaria media en sus dos formas
- total_loss: L_LP^src + λ·(L_DC^src + L_DC^trg)
"""

import torch
import torch.nn.functional as F
from torch import Tensor

from ..errors import BatchTooSmall, DomainError, ShapeMismatch, TagShieldValidationError


def ntxent_loss(projections_i: Tensor, projections_j: Tensor, temperature: float = 0.5) -> Tensor:
    """
    Cada fila k tiene como positivo a su pareja (k ± N) y como negativos las
    otras 2N-2 filas. Invariante al reescalado positivo de cada vector.
    """
    if projections_i.shape != projections_j.shape or projections_i.dim() != 2:
        raise ShapeMismatch(
            f"Proyecciones incompatibles: {tuple(projections_i.shape)} y "
            f"{tuple(projections_j.shape)}"
        )
    n = projections_i.shape[0]
    if n < 2:
        raise BatchTooSmall(f"NT-Xent necesita al menos 2 pares, recibió {n}")
    if not temperature > 0:
        raise TagShieldValidationError(f"La temperatura debe ser positiva: {temperature}")

    features = F.normalize(torch.cat([projections_i, projections_j], dim=0), dim=1)
    similarity = features @ features.T / temperature
    self_mask = torch.eye(2 * n, dtype=torch.bool, device=features.device)
    similarity = similarity.masked_fill(self_mask, float("-inf"))
    targets = torch.cat([torch.arange(n, 2 * n), torch.arange(0, n)]).to(features.device)
    return F.cross_entropy(similarity, targets)


def _check_targets(targets: Tensor) -> None:
    if not bool(torch.all((targets == 0) | (targets == 1))):
        raise DomainError("Los objetivos binarios deben valer 0 o 1")


def bce_loss(probabilities: Tensor, targets: Tensor) -> Tensor:
    """Forma con probabilidades (salida sigmoide del DC)."""
    if probabilities.shape != targets.shape:
        raise ShapeMismatch(f"{tuple(probabilities.shape)} frente a {tuple(targets.shape)}")
    if not bool(torch.all((probabilities > 0) & (probabilities < 1))):
        raise DomainError("Las probabilidades deben estar en (0, 1)")
    _check_targets(targets)
    return F.binary_cross_entropy(probabilities, targets.to(probabilities.dtype))


def bce_logits_loss(logits: Tensor, targets: Tensor) -> Tensor:
    """Forma con logits (salida del LP); estable para logits grandes."""
    if logits.shape != targets.shape:
        raise ShapeMismatch(f"{tuple(logits.shape)} frente a {tuple(targets.shape)}")
    _check_targets(targets)
    return F.binary_cross_entropy_with_logits(logits, targets.to(logits.dtype))


def total_loss(
    lp_loss_src: Tensor, dc_loss_src: Tensor | float, dc_loss_trg: Tensor | float, weight: float
) -> Tensor:
    """Suma ponderada exacta; con weight 0 devuelve la pérdida del LP."""
    if weight == 0:
        return lp_loss_src
    return lp_loss_src + weight * (dc_loss_src + dc_loss_trg)
