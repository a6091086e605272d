"""
Directorio de Ejecución - Instantánea de Configuración, Métricas y Checkpoints

Estructura:
    <raíz>/config.json
    <raíz>/metrics.jsonl
    <raíz>/checkpoints/epoch-NNN.ckpt
    <raíz>/checkpoints/final.ckpt
    <raíz>/report.jsonl, report.txt   (solo eval)
"""

import json
import logging
import shutil
from pathlib import Path
from typing import Any

from ..errors import OutputExists
from ..mappers import config_to_dict
from ..types import RunConfig

logger = logging.getLogger(__name__)


class RunDirectory:
    """Un experimento, un directorio. No se sobrescribe sin `force`."""

    def __init__(self, root: Path) -> None:
        self.root: Path = root

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    @property
    def metrics_path(self) -> Path:
        return self.root / "metrics.jsonl"

    @property
    def checkpoints_dir(self) -> Path:
        return self.root / "checkpoints"

    @property
    def final_checkpoint(self) -> Path:
        return self.checkpoints_dir / "final.ckpt"

    def epoch_checkpoint(self, epoch: int) -> Path:
        return self.checkpoints_dir / f"epoch-{epoch:03d}.ckpt"

    def prepare(self, force: bool = False, resume: bool = False) -> None:
        """
        Crea el directorio. Si ya tiene contenido falla con OutputExists, salvo
        que se reanude (se conserva) o se fuerce (se borra antes).
        """
        if self.root.exists() and any(self.root.iterdir()) and not resume:
            if not force:
                raise OutputExists(
                    f"El directorio {self.root} ya existe; usa --force para sobrescribirlo"
                )
            logger.warning("Borrando el contenido previo de %s", self.root)
            shutil.rmtree(self.root)
        self.checkpoints_dir.mkdir(parents=True, exist_ok=True)

    def write_config(self, config: RunConfig) -> None:
        """Instantánea con todos los valores resueltos."""
        text = json.dumps(config_to_dict(config), indent=2, sort_keys=True, ensure_ascii=False)
        self.config_path.write_text(text + "\n", encoding="utf-8")


class MetricsLog:
    """Historial por época en JSON por líneas, sin marcas de tiempo."""

    def __init__(self, path: Path) -> None:
        self.path: Path = path

    def append(self, record: dict[str, Any]) -> None:
        with self.path.open("a", encoding="utf-8") as file:
            file.write(json.dumps(record, sort_keys=True) + "\n")

    def rewrite(self, records: list[dict[str, Any]]) -> None:
        """Reemplaza el archivo por `records` (al reanudar desde un checkpoint)."""
        lines = "".join(json.dumps(record, sort_keys=True) + "\n" for record in records)
        self.path.write_text(lines, encoding="utf-8")

    def read(self) -> list[dict[str, Any]]:
        if not self.path.exists():
            return []
        with self.path.open(encoding="utf-8") as file:
            return [json.loads(line) for line in file if line.strip()]
