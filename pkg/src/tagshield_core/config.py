"""
Configuración - Carga, Precedencia y Entorno

Precedencia de cada valor: argumento de línea de comandos > archivo de
configuración > variable de entorno > valor por defecto. Las variables de
entorno se pueden declarar en un archivo .env.
"""

import json
import logging
from os import getenv
from pathlib import Path
from typing import Any, cast

from .errors import ConfigError
from .mappers import validate_run_config
from .types import RunConfig

logger = logging.getLogger(__name__)

ENV_LOG_LEVEL = "TAGSHIELD_LOG_LEVEL"
ENV_NUM_THREADS = "TAGSHIELD_NUM_THREADS"
ENV_SEED = "TAGSHIELD_SEED"


def read_config_file(path: Path) -> dict[str, Any]:
    """Lee un archivo de configuración JSON como diccionario crudo."""
    if not path.is_file():
        raise ConfigError(f"No existe el archivo de configuración {path}")
    try:
        with path.open(encoding="utf-8") as file:
            raw = json.load(file)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON no válido ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: la configuración debe ser un objeto")
    return cast(dict[str, Any], raw)


def load_run_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """
    Construye la configuración resuelta. `overrides` contiene solo los
    valores indicados explícitamente en la línea de comandos.
    """
    raw = read_config_file(path) if path is not None else {}

    # El entorno solo completa lo que el archivo no fija
    env_seed = getenv(ENV_SEED)
    if "seed" not in raw and env_seed:
        try:
            raw["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"{ENV_SEED} debe ser entero: {env_seed!r}") from None

    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    config = validate_run_config(raw)
    logger.debug("Configuración resuelta: setting=%s seed=%d", config.setting.value, config.seed)
    return config


def env_log_level(default: str = "INFO") -> str:
    return (getenv(ENV_LOG_LEVEL) or default).upper()


def env_num_threads() -> int | None:
    value = getenv(ENV_NUM_THREADS)
    if not value:
        return None
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"{ENV_NUM_THREADS} debe ser entero: {value!r}") from None
    if threads < 1:
        raise ConfigError(f"{ENV_NUM_THREADS} debe ser positivo: {threads}")
    return threads
