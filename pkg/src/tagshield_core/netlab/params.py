"""
Parámetros - Congelamiento y Sumas de Verificación
"""

import hashlib

from torch import nn


def param_checksum(module: nn.Module) -> str:
    """sha256 del state_dict completo (parámetros y estadísticas de BN), en orden de nombre."""
    digest = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        digest.update(name.encode("utf-8"))
        digest.update(str(tensor.dtype).encode("utf-8"))
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def set_frozen(module: nn.Module, frozen: bool) -> None:
    """
    Congelar desactiva los gradientes y pone el módulo en modo evaluación,
    así las estadísticas de normalización tampoco cambian.
    """
    for parameter in module.parameters():
        parameter.requires_grad_(not frozen)
    module.train(not frozen)


def count_parameters(module: nn.Module) -> int:
    return sum(parameter.numel() for parameter in module.parameters())
