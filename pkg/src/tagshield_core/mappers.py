"""
Mappers - Funciones de Conversión y Validación

Este módulo contiene funciones para convertir entre los tipos internos de
TagShield y sus representaciones JSON (registros de manifiesto, especificaciones
de síntesis y configuraciones de experimento), validando cada campo.
"""

import math
from dataclasses import fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, cast

from .errors import ConfigError, InvariantViolation, TagShieldValidationError
from .types import (
    Domain,
    EncoderConfig,
    EvalCondition,
    GrlConfig,
    LambdaSchedule,
    ManifestPaths,
    NoiseRecord,
    RunConfig,
    SettingName,
    Split,
    StageSettings,
    SynthConfig,
    SynthKind,
    SynthSpec,
    TrackRecord,
)

# Funciones de validación de registros de manifiesto


def validate_enum[E: Enum](enum_type: type[E], value: Any, what: str) -> E:
    """Valida que el valor pertenezca al enum y devuelve el miembro."""
    try:
        return enum_type(value)
    except ValueError:
        allowed = ", ".join(str(member.value) for member in enum_type)
        raise TagShieldValidationError(
            f"{what} no válido: {value!r} (permitidos: {allowed})"
        ) from None


def validate_id(value: Any) -> str:
    """Valida que el id sea un string no vacío."""
    if not isinstance(value, str) or not value:
        raise TagShieldValidationError(f"Id no válido: {value!r}")
    return value


def validate_synth_spec(value: Any) -> SynthSpec:
    """Valida un diccionario y devuelve la especificación de síntesis."""
    if not isinstance(value, dict):
        raise TagShieldValidationError(f"La especificación debe ser un objeto: {value}")
    value = cast(dict[str, Any], value)
    seed = value.get("seed")
    duration = value.get("duration_s")
    params = value.get("params", {})
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise TagShieldValidationError(f"Semilla no válida: {seed!r}")
    if not isinstance(duration, int | float) or isinstance(duration, bool):
        raise TagShieldValidationError(f"Duración no válida: {duration!r}")
    if not isinstance(params, dict):
        raise TagShieldValidationError(f"Parámetros no válidos: {params!r}")
    return SynthSpec(
        kind=validate_enum(SynthKind, value.get("kind"), "Tipo de síntesis"),
        seed=seed,
        duration_s=float(duration),
        params=dict(cast(dict[str, Any], params)),
        sample_rate_hz=int(value.get("sample_rate_hz", 22050)),
    )


def validate_source(value: Any, base_dir: Path | None) -> Path | SynthSpec:
    """Una fuente es {'path': ...} o {'synth': {...}}."""
    if not isinstance(value, dict):
        raise TagShieldValidationError(f"Fuente no válida: {value!r}")
    value = cast(dict[str, Any], value)
    if "synth" in value:
        return validate_synth_spec(value["synth"])
    path = value.get("path")
    if not isinstance(path, str) or not path:
        raise TagShieldValidationError(f"Ruta de audio no válida: {path!r}")
    resolved = Path(path)
    if not resolved.is_absolute() and base_dir is not None:
        resolved = base_dir / resolved
    return resolved


def validate_tags(value: Any, n_tags: int, record_id: str) -> tuple[int, ...] | None:
    """Vector binario de exactamente `n_tags` entradas, o None."""
    if value is None:
        return None
    if not isinstance(value, list):
        raise InvariantViolation("las etiquetas deben ser una lista", record_id)
    tags = cast(list[Any], value)
    if len(tags) != n_tags:
        raise InvariantViolation(
            f"vector de etiquetas de dimensión {len(tags)}, se esperaba {n_tags}",
            record_id,
        )
    if any(
        not isinstance(tag, int) or isinstance(tag, bool) or tag not in (0, 1)
        for tag in tags
    ):
        raise InvariantViolation("las etiquetas deben valer 0 o 1", record_id)
    return tuple(int(tag) for tag in tags)


def validate_track_record(
    value: Any, n_tags: int, base_dir: Path | None = None
) -> TrackRecord:
    """Valida un diccionario crudo y devuelve el TrackRecord correspondiente."""
    if not isinstance(value, dict):
        raise TagShieldValidationError(f"Un registro debe ser un objeto: {value}")
    value = cast(dict[str, Any], value)
    record_id = validate_id(value.get("id"))
    noise_refs = value.get("noise_refs", [])
    if not isinstance(noise_refs, list) or not all(
        isinstance(ref, str) for ref in cast(list[Any], noise_refs)
    ):
        raise InvariantViolation("noise_refs debe ser una lista de ids", record_id)
    record = TrackRecord(
        id=record_id,
        source=validate_source(value.get("source"), base_dir),
        domain=validate_enum(Domain, value.get("domain"), "Dominio"),
        split=validate_enum(Split, value.get("split"), "Partición"),
        tags=validate_tags(value.get("tags"), n_tags, record_id),
        noise_refs=tuple(cast(list[str], noise_refs)),
    )
    if record.domain is Domain.source and record.noise_refs:
        raise InvariantViolation("un registro fuente no puede tener ruidos", record_id)
    return record


def validate_noise_record(value: Any, base_dir: Path | None = None) -> NoiseRecord:
    """Valida un diccionario crudo y devuelve el NoiseRecord correspondiente."""
    if not isinstance(value, dict):
        raise TagShieldValidationError(f"Un registro debe ser un objeto: {value}")
    value = cast(dict[str, Any], value)
    return NoiseRecord(
        id=validate_id(value.get("id")),
        source=validate_source(value.get("source"), base_dir),
        split=validate_enum(Split, value.get("split"), "Partición"),
    )


def synth_spec_to_dict(spec: SynthSpec) -> dict[str, Any]:
    return {
        "kind": spec.kind.value,
        "seed": spec.seed,
        "duration_s": spec.duration_s,
        "params": dict(spec.params),
        "sample_rate_hz": spec.sample_rate_hz,
    }


def source_to_dict(source: Path | SynthSpec, base_dir: Path | None) -> dict[str, Any]:
    """Las rutas se escriben relativas al manifiesto cuando es posible."""
    if isinstance(source, SynthSpec):
        return {"synth": synth_spec_to_dict(source)}
    if base_dir is not None and source.is_absolute():
        try:
            return {"path": source.relative_to(base_dir.resolve()).as_posix()}
        except ValueError:
            pass
    return {"path": source.as_posix()}


def track_record_to_dict(record: TrackRecord, base_dir: Path | None) -> dict[str, Any]:
    return {
        "id": record.id,
        "source": source_to_dict(record.source, base_dir),
        "domain": record.domain.value,
        "split": record.split.value,
        "tags": list(record.tags) if record.tags is not None else None,
        "noise_refs": list(record.noise_refs),
    }


def noise_record_to_dict(record: NoiseRecord, base_dir: Path | None) -> dict[str, Any]:
    return {
        "id": record.id,
        "source": source_to_dict(record.source, base_dir),
        "split": record.split.value,
    }


# Configuración de experimentos


def _section(value: dict[str, Any], key: str) -> dict[str, Any]:
    section = value.get(key, {})
    if not isinstance(section, dict):
        raise ConfigError(f"La sección '{key}' debe ser un objeto: {section!r}")
    return cast(dict[str, Any], section)


def _check_keys(value: dict[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"Claves desconocidas en {where}: {sorted(unknown)}")


def _number(value: Any, what: str, positive: bool = False) -> float:
    if not isinstance(value, int | float) or isinstance(value, bool):
        raise ConfigError(f"{what} debe ser numérico: {value!r}")
    number = float(value)
    if not math.isfinite(number) or (positive and number <= 0):
        raise ConfigError(f"{what} fuera de rango: {value!r}")
    return number


def _integer(value: Any, what: str, minimum: int | None = None) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{what} debe ser entero: {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{what} debe ser >= {minimum}: {value}")
    return value


def validate_stage_settings(value: dict[str, Any], default: StageSettings) -> StageSettings:
    """Valida la sección de una etapa completando con los valores por defecto."""
    _check_keys(value, {f.name for f in fields(StageSettings)}, "etapa")
    patience = value.get("patience", default.patience)
    return StageSettings(
        learning_rate=_number(
            value.get("learning_rate", default.learning_rate), "learning_rate", True
        ),
        max_epochs=_integer(value.get("max_epochs", default.max_epochs), "max_epochs", 1),
        batch_size=_integer(value.get("batch_size", default.batch_size), "batch_size", 2),
        patience=None if patience is None else _integer(patience, "patience", 1),
    )


def validate_encoder_config(value: dict[str, Any]) -> EncoderConfig:
    """Valida la sección del codificador."""
    _check_keys(value, {f.name for f in fields(EncoderConfig)}, "encoder")
    default = EncoderConfig()
    input_length = _integer(value.get("input_length", default.input_length), "input_length", 9)
    # n_blocks se deduce de input_length cuando no se indica
    n_blocks_default = round(math.log(input_length, 3)) - 1
    projection = value.get("projection_dim", default.projection_dim)
    return EncoderConfig(
        input_length=input_length,
        n_blocks=_integer(value.get("n_blocks", n_blocks_default), "n_blocks", 1),
        base_channels=_integer(
            value.get("base_channels", default.base_channels), "base_channels", 1
        ),
        embedding_dim=_integer(
            value.get("embedding_dim", default.embedding_dim), "embedding_dim", 2
        ),
        projection_dim=None if projection is None else _integer(projection, "projection_dim", 1),
    )


def validate_conditions(value: Any) -> tuple[EvalCondition, ...]:
    """Acepta 'clean,-5,0,5,10' o una lista equivalente."""
    if isinstance(value, str):
        items: list[Any] = value.split(",")
    elif isinstance(value, list):
        items = cast(list[Any], value)
    else:
        raise ConfigError(f"Condiciones no válidas: {value!r}")
    conditions = tuple(EvalCondition.parse(str(item)) for item in items)
    if not conditions or len(set(conditions)) != len(conditions):
        raise ConfigError(f"Condiciones vacías o repetidas: {value!r}")
    return conditions


def _paths(value: dict[str, Any], where: str) -> dict[str, Path]:
    resolved: dict[str, Path] = {}
    for key, item in value.items():
        if not isinstance(item, str):
            raise ConfigError(f"{where}.{key} debe ser una ruta: {item!r}")
        resolved[key] = Path(item)
    return resolved


def validate_synth_config(value: dict[str, Any]) -> SynthConfig:
    """Valida la sección del corpus sintético."""
    _check_keys(value, {f.name for f in fields(SynthConfig)}, "synth")
    default = SynthConfig()
    fractions = {
        key: _number(value.get(key, getattr(default, key)), key)
        for key in ("valid_fraction", "test_fraction", "target_fraction")
    }
    if any(not 0 <= fraction < 1 for fraction in fractions.values()):
        raise ConfigError(f"Fracciones fuera de [0, 1): {fractions}")
    write_audio = value.get("write_audio", default.write_audio)
    if not isinstance(write_audio, bool):
        raise ConfigError(f"write_audio debe ser booleano: {write_audio!r}")
    return SynthConfig(
        n_tracks=_integer(value.get("n_tracks", default.n_tracks), "n_tracks", 4),
        n_extra=_integer(value.get("n_extra", default.n_extra), "n_extra", 0),
        n_noises=_integer(value.get("n_noises", default.n_noises), "n_noises", 1),
        track_duration_s=_number(
            value.get("track_duration_s", default.track_duration_s), "track_duration_s", True
        ),
        noise_duration_s=_number(
            value.get("noise_duration_s", default.noise_duration_s), "noise_duration_s", True
        ),
        write_audio=write_audio,
        output_dir=Path(str(value.get("output_dir", default.output_dir))),
        **fractions,
    )


def validate_run_config(value: Any) -> RunConfig:
    """
    Valida el diccionario de configuración de un experimento y materializa
    todos los valores por defecto.
    """
    if not isinstance(value, dict):
        raise ConfigError(f"La configuración debe ser un objeto: {value!r}")
    value = cast(dict[str, Any], value)
    _check_keys(value, {f.name for f in fields(RunConfig)}, "la configuración")
    default = RunConfig()

    grl = _section(value, "grl")
    _check_keys(grl, {"weight", "schedule"}, "grl")
    manifests = _section(value, "manifests")
    _check_keys(manifests, {f.name for f in fields(ManifestPaths)}, "manifests")
    noise_count = _integer(value.get("noise_count", default.noise_count), "noise_count")
    if noise_count not in (1, 2, 4):
        raise ConfigError(f"noise_count debe ser 1, 2 o 4: {noise_count}")
    precision = _integer(value.get("precision", default.precision), "precision")
    if precision not in (32, 64):
        raise ConfigError(f"precision debe ser 32 o 64: {precision}")
    snr_min = _number(value.get("snr_min_db", default.snr_min_db), "snr_min_db")
    snr_max = _number(value.get("snr_max_db", default.snr_max_db), "snr_max_db")
    if snr_min > snr_max:
        raise ConfigError(f"Rango de SNR vacío: [{snr_min}, {snr_max}]")
    probability = _number(
        value.get("noisy_view_probability", default.noisy_view_probability),
        "noisy_view_probability",
    )
    if not 0 <= probability <= 1:
        raise ConfigError(f"noisy_view_probability fuera de [0, 1]: {probability}")

    try:
        return RunConfig(
            setting=validate_enum(SettingName, value.get("setting", default.setting.value), "Configuración"),
            seed=_integer(value.get("seed", default.seed), "seed", 0),
            sample_rate_hz=_integer(
                value.get("sample_rate_hz", default.sample_rate_hz), "sample_rate_hz", 1
            ),
            n_tags=_integer(value.get("n_tags", default.n_tags), "n_tags", 1),
            target_rms=_number(value.get("target_rms", default.target_rms), "target_rms", True),
            noise_count=noise_count,
            snr_min_db=snr_min,
            snr_max_db=snr_max,
            noisy_view_probability=probability,
            gain_jitter_db=_number(
                value.get("gain_jitter_db", default.gain_jitter_db), "gain_jitter_db"
            ),
            temperature=_number(
                value.get("temperature", default.temperature), "temperature", True
            ),
            grl=GrlConfig(
                weight=_number(grl.get("weight", default.grl.weight), "grl.weight"),
                schedule=validate_enum(
                    LambdaSchedule, grl.get("schedule", default.grl.schedule.value), "Calendario"
                ),
            ),
            encoder=validate_encoder_config(_section(value, "encoder")),
            fe_pretrain=validate_stage_settings(_section(value, "fe_pretrain"), default.fe_pretrain),
            dc_pretrain=validate_stage_settings(_section(value, "dc_pretrain"), default.dc_pretrain),
            finetune=validate_stage_settings(_section(value, "finetune"), default.finetune),
            eval_conditions=validate_conditions(
                value.get("eval_conditions", [c.label for c in default.eval_conditions])
            ),
            eval_seed=_integer(value.get("eval_seed", default.eval_seed), "eval_seed", 0),
            precision=precision,
            prefetch=_integer(value.get("prefetch", default.prefetch), "prefetch", 0),
            manifests=ManifestPaths(**_paths(manifests, "manifests")),
            synth=validate_synth_config(_section(value, "synth")),
            output_dir=Path(str(value.get("output_dir", default.output_dir))),
        )
    except TagShieldValidationError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    except TypeError as exc:
        raise ConfigError(f"Configuración no válida: {exc}") from exc


def config_to_dict(value: Any) -> Any:
    """Convierte recursivamente una configuración en tipos JSON."""
    if is_dataclass(value) and not isinstance(value, type):
        if isinstance(value, EvalCondition):
            return value.label
        return {f.name: config_to_dict(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, tuple | list):
        return [config_to_dict(item) for item in cast(list[Any], value)]
    if isinstance(value, frozenset):
        return sorted(config_to_dict(item) for item in cast(frozenset[Any], value))
    return value

