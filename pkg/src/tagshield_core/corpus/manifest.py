"""
Manifiestos - Lectura y Escritura de Corpus Declarativos

Un manifiesto es un archivo de registros JSON, uno por línea, en UTF-8. La
primera línea es obligatoria y declara el esquema, la versión, el tipo de
registros y el vocabulario de etiquetas.
"""

import json
from pathlib import Path
from typing import Any, cast

from ..errors import ConfigError, InvariantViolation, ParseError, TagShieldValidationError
from ..mappers import (
    noise_record_to_dict,
    track_record_to_dict,
    validate_noise_record,
    validate_track_record,
)
from ..types import Manifest, ManifestKind, NoiseRecord, TrackRecord

SCHEMA_NAME = "tagshield-manifest"
SCHEMA_VERSION = 1


def _parse_header(line: str) -> tuple[ManifestKind, int, tuple[str, ...]]:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"cabecera no es JSON: {exc}", line=1) from exc
    if not isinstance(header, dict):
        raise ParseError("la cabecera debe ser un objeto", line=1)
    header = cast(dict[str, Any], header)
    if header.get("schema") != SCHEMA_NAME:
        raise ParseError(f"esquema desconocido: {header.get('schema')!r}", line=1)
    if header.get("version") != SCHEMA_VERSION:
        raise ParseError(f"versión no soportada: {header.get('version')!r}", line=1)
    try:
        kind = ManifestKind(header.get("kind"))
    except ValueError:
        raise ParseError(f"tipo de manifiesto no válido: {header.get('kind')!r}", line=1) from None
    n_tags = header.get("n_tags")
    if not isinstance(n_tags, int) or n_tags < 1:
        raise ParseError(f"n_tags no válido: {n_tags!r}", line=1)
    tag_names = header.get("tag_names") or [f"tag_{i}" for i in range(n_tags)]
    if not isinstance(tag_names, list) or len(cast(list[Any], tag_names)) != n_tags:
        raise ParseError("tag_names debe tener n_tags nombres", line=1)
    return kind, n_tags, tuple(str(name) for name in cast(list[Any], tag_names))


def read_manifest(path: Path) -> Manifest:
    """
    Lee un manifiesto completo. Los errores de formato se informan con el
    número de línea y las violaciones de invariantes con el id del registro.
    """
    base_dir = path.parent.resolve()
    with path.open(encoding="utf-8") as file:
        lines = file.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: falta la cabecera del manifiesto", line=1)
    kind, n_tags, tag_names = _parse_header(lines[0])

    records: list[TrackRecord] | list[NoiseRecord] = []
    seen: set[str] = set()
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"JSON no válido: {exc}", line=number) from exc
        try:
            if kind is ManifestKind.tracks:
                record: TrackRecord | NoiseRecord = validate_track_record(raw, n_tags, base_dir)
            else:
                record = validate_noise_record(raw, base_dir)
        except InvariantViolation:
            raise
        except TagShieldValidationError as exc:
            raise ParseError(str(exc), line=number) from exc
        if record.id in seen:
            raise InvariantViolation("id duplicado en el manifiesto", record.id)
        seen.add(record.id)
        records.append(record)  # type: ignore[arg-type]
    return Manifest(kind=kind, n_tags=n_tags, tag_names=tag_names, records=tuple(records))  # type: ignore[arg-type]


def load_manifest(path: Path, n_tags: int | None = None) -> list[TrackRecord]:
    """Carga un manifiesto de pistas; comprueba el número de etiquetas si se indica."""
    manifest = read_manifest(path)
    if manifest.kind is not ManifestKind.tracks:
        raise ConfigError(f"{path} no es un manifiesto de pistas")
    if n_tags is not None and manifest.n_tags != n_tags:
        raise ConfigError(
            f"{path} declara {manifest.n_tags} etiquetas, la configuración {n_tags}"
        )
    return cast(list[TrackRecord], list(manifest.records))


def load_noise_manifest(path: Path) -> list[NoiseRecord]:
    """Carga un manifiesto de ruidos."""
    manifest = read_manifest(path)
    if manifest.kind is not ManifestKind.noises:
        raise ConfigError(f"{path} no es un manifiesto de ruidos")
    return cast(list[NoiseRecord], list(manifest.records))


def write_manifest(
    path: Path,
    records: list[TrackRecord] | list[NoiseRecord],
    kind: ManifestKind,
    n_tags: int,
    tag_names: tuple[str, ...] | None = None,
) -> None:
    """Escribe un manifiesto (cabecera más un registro por línea)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    base_dir = path.parent.resolve()
    header = {
        "schema": SCHEMA_NAME,
        "version": SCHEMA_VERSION,
        "kind": kind.value,
        "n_tags": n_tags,
        "tag_names": list(tag_names or (f"tag_{i}" for i in range(n_tags))),
    }
    lines = [json.dumps(header, ensure_ascii=False)]
    for record in records:
        if isinstance(record, TrackRecord):
            item = track_record_to_dict(record, base_dir)
        else:
            item = noise_record_to_dict(record, base_dir)
        lines.append(json.dumps(item, ensure_ascii=False, sort_keys=True))
    with path.open(mode="w", encoding="utf-8") as file:
        file.write("\n".join(lines) + "\n")
