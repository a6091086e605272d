"""
Checkpoints - Contenedor Versionado con Suma de Verificación

Formato del archivo:
    línea 1: TAGSHIELD-CKPT/1
    línea 2: sha256 hexadecimal de la carga útil
    resto:   carga útil serializada con torch.save

La carga útil solo contiene tipos primitivos y tensores, y se lee con
`weights_only=True`.
"""

import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, cast

import torch

from ..errors import ConfigMismatch, CorruptCheckpoint, MissingCheckpoint
from ..mappers import config_to_dict
from ..types import RunConfig, StageName

logger = logging.getLogger(__name__)

MAGIC = b"TAGSHIELD-CKPT/1\n"

# Campos que no alteran los resultados y pueden cambiar al reanudar
_VOLATILE_FIELDS = ("output_dir", "prefetch")


def config_fingerprint(config: RunConfig | dict[str, Any]) -> str:
    raw = config_to_dict(config) if isinstance(config, RunConfig) else dict(config)
    for name in _VOLATILE_FIELDS:
        raw.pop(name, None)
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass
class EarlyStopState:
    best_metric: float | None = None
    best_epoch: int | None = None
    bad_epochs: int = 0
    best_model_state: dict[str, torch.Tensor] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "best_metric": self.best_metric,
            "best_epoch": self.best_epoch,
            "bad_epochs": self.bad_epochs,
            "best_model_state": self.best_model_state,
        }

    @classmethod
    def from_dict(cls, value: dict[str, Any]) -> "EarlyStopState":
        return cls(
            best_metric=value.get("best_metric"),
            best_epoch=value.get("best_epoch"),
            bad_epochs=int(value.get("bad_epochs", 0)),
            best_model_state=value.get("best_model_state"),
        )


@dataclass
class Checkpoint:
    """Estado completo de una etapa al final de una época."""

    stage: StageName
    epoch: int
    config: dict[str, Any]
    model_state: dict[str, torch.Tensor]
    optimizer_state: dict[str, Any] | None = None
    torch_rng_state: torch.Tensor | None = None
    history: list[dict[str, Any]] = field(default_factory=list)  # type: ignore
    early_stop: EarlyStopState = field(default_factory=EarlyStopState)
    finished: bool = False

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.config)

    def check_config(self, config: RunConfig) -> None:
        """ConfigMismatch si la configuración actual no es la del checkpoint."""
        if self.fingerprint != config_fingerprint(config):
            current = config_to_dict(config)
            changed = sorted(
                key
                for key in set(current) | set(self.config)
                if key not in _VOLATILE_FIELDS and current.get(key) != self.config.get(key)
            )
            raise ConfigMismatch(f"La configuración difiere del checkpoint en: {changed}")

    def check_encoder(self, config: RunConfig) -> None:
        """Los checkpoints de etapas previas deben compartir arquitectura."""
        current = config_to_dict(config)
        for key in ("encoder", "n_tags", "precision"):
            if current[key] != self.config.get(key):
                raise ConfigMismatch(
                    f"El checkpoint de {self.stage.value} usa otro valor de '{key}'"
                )


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    """Escribe el checkpoint de forma atómica (archivo temporal y renombrado)."""
    payload = {
        "stage": checkpoint.stage.value,
        "epoch": checkpoint.epoch,
        "config": checkpoint.config,
        "model_state": checkpoint.model_state,
        "optimizer_state": checkpoint.optimizer_state,
        "torch_rng_state": checkpoint.torch_rng_state,
        "history": checkpoint.history,
        "early_stop": checkpoint.early_stop.to_dict(),
        "finished": checkpoint.finished,
    }
    buffer = io.BytesIO()
    torch.save(payload, buffer)
    data = buffer.getvalue()
    digest = hashlib.sha256(data).hexdigest().encode("ascii")

    path.parent.mkdir(parents=True, exist_ok=True)
    temporary = path.with_suffix(path.suffix + ".tmp")
    with temporary.open("wb") as file:
        file.write(MAGIC + digest + b"\n" + data)
    temporary.replace(path)
    logger.debug("Checkpoint escrito en %s", path)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """Lee y verifica un checkpoint."""
    if not path.is_file():
        raise MissingCheckpoint(f"No existe el checkpoint {path}")
    raw = path.read_bytes()
    if not raw.startswith(MAGIC):
        raise CorruptCheckpoint(f"{path}: cabecera desconocida")
    header_end = raw.find(b"\n", len(MAGIC))
    if header_end < 0:
        raise CorruptCheckpoint(f"{path}: falta la suma de verificación")
    expected = raw[len(MAGIC) : header_end].decode("ascii", errors="replace")
    data = raw[header_end + 1 :]
    if hashlib.sha256(data).hexdigest() != expected:
        raise CorruptCheckpoint(f"{path}: la suma de verificación no coincide")

    try:
        payload = cast(dict[str, Any], torch.load(io.BytesIO(data), weights_only=True))
        return Checkpoint(
            stage=StageName(payload["stage"]),
            epoch=int(payload["epoch"]),
            config=payload["config"],
            model_state=payload["model_state"],
            optimizer_state=payload.get("optimizer_state"),
            torch_rng_state=payload.get("torch_rng_state"),
            history=list(payload.get("history") or []),
            early_stop=EarlyStopState.from_dict(payload.get("early_stop") or {}),
            finished=bool(payload.get("finished", False)),
        )
    except (KeyError, ValueError, RuntimeError, TypeError) as exc:
        raise CorruptCheckpoint(f"{path}: contenido no válido ({exc})") from exc
