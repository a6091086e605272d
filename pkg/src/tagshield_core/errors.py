"""
Errores - Jerarquía de Excepciones de TagShield

Todas las fallas del sistema heredan de TagShieldError. Los errores de
validación también heredan de ValueError y los de ejecución de RuntimeError,
de modo que el código cliente puede capturarlos de forma genérica.
Cada clase declara el código de salida que la CLI debe devolver.
"""


class TagShieldError(Exception):
    """Excepción base de TagShield."""

    exit_code: int = 1


# Errores de validación (entrada, configuración, datos)


class TagShieldValidationError(TagShieldError, ValueError):
    """Excepción base para errores de validación en TagShield."""

    exit_code = 2


class InvalidClip(TagShieldValidationError):
    """El clip de audio está vacío, tiene valores no finitos o una tasa inválida."""


class ZeroEnergy(TagShieldValidationError):
    """La señal es silenciosa (RMS igual a cero) y no se puede escalar."""


class LengthMismatch(TagShieldValidationError):
    """Los clips a mezclar difieren en longitud o tasa de muestreo."""


class BadSpec(TagShieldValidationError):
    """La especificación de síntesis no es válida."""


class ParseError(TagShieldValidationError):
    """Un manifiesto no se pudo parsear; incluye el número de línea."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line: int | None = line
        prefix = f"línea {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class InvariantViolation(TagShieldValidationError):
    """Un registro viola un invariante; incluye el id del registro."""

    def __init__(self, message: str, record_id: str | None = None) -> None:
        self.record_id: str | None = record_id
        prefix = f"registro '{record_id}': " if record_id is not None else ""
        super().__init__(f"{prefix}{message}")


class MissingTags(TagShieldValidationError):
    """Se requieren etiquetas y algún registro no las tiene."""


class ShapeMismatch(TagShieldValidationError):
    """Un tensor de entrada no tiene la forma esperada."""


class BatchTooSmall(TagShieldValidationError):
    """La pérdida contrastiva necesita al menos dos pares."""


class DomainError(TagShieldValidationError):
    """Valor fuera del dominio de la función (p. ej. probabilidad fuera de (0,1))."""


class DegenerateLabels(TagShieldValidationError):
    """Las etiquetas tienen una sola clase; la métrica no está definida."""


class AllTagsDegenerate(TagShieldValidationError):
    """Ninguna etiqueta tiene ambas clases presentes."""


class ConfigError(TagShieldValidationError):
    """La configuración no es válida."""


class ConfigMismatch(TagShieldValidationError):
    """El checkpoint se creó con una configuración distinta."""


class OutputExists(TagShieldValidationError):
    """El directorio de salida ya existe y no se indicó --force."""


# Errores de ejecución


class TagShieldRuntimeError(TagShieldError, RuntimeError):
    """Excepción base para errores de ejecución en TagShield."""


class EmptyPool(TagShieldRuntimeError):
    """No hay registros disponibles para muestrear."""

    exit_code = 2


class OverlapViolation(TagShieldRuntimeError):
    """Un mismo id de pista apareció en las mitades fuente y objetivo."""


class DivergenceDetected(TagShieldRuntimeError):
    """La pérdida dejó de ser finita durante el entrenamiento."""

    exit_code = 4


class MissingCheckpoint(TagShieldRuntimeError):
    """Falta un checkpoint requerido por la etapa."""

    exit_code = 3


class CorruptCheckpoint(TagShieldRuntimeError):
    """El checkpoint no pasó la verificación de integridad."""

    exit_code = 3
