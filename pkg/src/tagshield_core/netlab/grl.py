"""
Inversión de Gradiente - Identidad hacia Adelante, -λ·g hacia Atrás
"""

import torch
from torch import Tensor, nn
from torch.autograd import Function

from ..errors import ConfigError


class GradientReverse(Function):
    @staticmethod
    def forward(ctx: torch.autograd.function.FunctionCtx, x: Tensor, strength: float) -> Tensor:  # type: ignore[override]
        ctx.strength = strength  # type: ignore[attr-defined]
        return x.view_as(x)

    @staticmethod
    def backward(ctx: torch.autograd.function.FunctionCtx, grad_output: Tensor) -> tuple[Tensor, None]:  # type: ignore[override]
        return grad_output.neg() * ctx.strength, None  # type: ignore[attr-defined]


def gradient_reverse(x: Tensor, strength: float = 1.0) -> Tensor:
    """Devuelve `x` sin cambios; en la retropropagación multiplica el gradiente por -strength."""
    if not strength >= 0:
        raise ConfigError(f"La intensidad de inversión debe ser >= 0: {strength}")
    return GradientReverse.apply(x, float(strength))  # type: ignore[no-any-return]


class GradientReversal(nn.Module):
    """Capa con intensidad fija, para componer en nn.Sequential."""

    def __init__(self, strength: float = 1.0) -> None:
        super().__init__()
        self.strength = strength

    def forward(self, x: Tensor) -> Tensor:
        return gradient_reverse(x, self.strength)
