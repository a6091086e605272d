"""
Definiciones de Tipos y Modelos de Datos

Este módulo contiene todas las definiciones de tipos, clases de datos y
enums utilizados en todo el sistema TagShield: audio, corpus, modelos,
entrenamiento y evaluación.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from .errors import ConfigError, InvalidClip

type FloatArray = npt.NDArray[np.float64]
type Waveforms = npt.NDArray[np.float32]

DEFAULT_SAMPLE_RATE_HZ = 22050
DEFAULT_INPUT_LENGTH = 59049  # 3^10
DEFAULT_N_TAGS = 50


class SynthKind(Enum):
    """Tipo de señal que genera una especificación de síntesis."""

    music = "music"
    noise = "noise"


class Domain(Enum):
    """Dominio de un registro: fuente (limpio, etiquetado) u objetivo (ruidoso)."""

    source = "source"
    target = "target"


class Split(Enum):
    """Partición del corpus."""

    train = "train"
    valid = "valid"
    test = "test"


class SettingName(Enum):
    """Configuraciones experimentales comparadas."""

    baseline = "baseline"
    oracle = "oracle"
    proposed_a = "proposed_a"
    proposed_b = "proposed_b"


class StageName(Enum):
    """Las tres etapas de entrenamiento."""

    fe_pretrain = "fe_pretrain"
    dc_pretrain = "dc_pretrain"
    adversarial_finetune = "adversarial_finetune"


class ModelGroup(Enum):
    """Colecciones de parámetros: extractor, clasificador de dominio, predictor."""

    fe = "fe"
    dc = "dc"
    lp = "lp"


class LambdaSchedule(Enum):
    """Evolución del peso adversarial a lo largo del ajuste fino."""

    constant = "constant"
    dann = "dann"


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Forma de onda mono a tasa de muestreo fija. Inmutable."""

    samples: FloatArray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if samples.size == 0:
            raise InvalidClip("El clip no tiene muestras")
        if not np.all(np.isfinite(samples)):
            raise InvalidClip("El clip contiene valores no finitos")
        if int(self.sample_rate_hz) <= 0:
            raise InvalidClip(f"Tasa de muestreo no válida: {self.sample_rate_hz}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return int(self.samples.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AudioClip):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and bool(
            np.array_equal(self.samples, other.samples)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True)
class SynthSpec:
    """
    Receta determinista de una señal sintética.

    Parámetros reconocidos en `params`:
    - música: fundamental_hz, n_harmonics, envelope (steady | pulse | swell),
      level_rms
    - ruido: tilt_db_per_octave, burst (bool), burst_rate_hz, level_rms
    """

    kind: SynthKind
    seed: int
    duration_s: float
    params: dict[str, Any] = field(default_factory=dict)  # type: ignore
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ


@dataclass(frozen=True)
class TrackRecord:
    """Entrada de un manifiesto de pistas musicales."""

    id: str
    source: Path | SynthSpec
    domain: Domain
    split: Split
    tags: tuple[int, ...] | None = None
    noise_refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class NoiseRecord:
    """Entrada de un manifiesto de ruidos."""

    id: str
    source: Path | SynthSpec
    split: Split


class ManifestKind(Enum):
    """Contenido de un manifiesto."""

    tracks = "tracks"
    noises = "noises"


@dataclass(frozen=True)
class Manifest:
    """Manifiesto completo: cabecera más registros."""

    kind: ManifestKind
    n_tags: int
    tag_names: tuple[str, ...]
    records: tuple[TrackRecord, ...] | tuple[NoiseRecord, ...]


@dataclass(frozen=True)
class ExperimentSetting:
    """Configuración experimental: qué datos y qué componentes se usan."""

    name: SettingName
    uses_dc: bool
    target_tagged: bool
    extra_unlabeled_pool: Path | None = None

    def __post_init__(self) -> None:
        if self.name in (SettingName.baseline, SettingName.oracle) and self.uses_dc:
            raise ConfigError(f"La configuración {self.name.value} no usa el DC")
        if self.name is SettingName.oracle and not self.target_tagged:
            raise ConfigError("La configuración oracle requiere objetivo etiquetado")
        if self.name in (SettingName.proposed_a, SettingName.proposed_b) and (
            self.target_tagged or not self.uses_dc
        ):
            raise ConfigError(
                f"La configuración {self.name.value} usa el DC y objetivo sin etiquetas"
            )
        if self.name is SettingName.proposed_b and self.extra_unlabeled_pool is None:
            raise ConfigError("proposed_b requiere un conjunto extra sin etiquetas")

    @classmethod
    def named(
        cls, name: SettingName, extra_unlabeled_pool: Path | None = None
    ) -> "ExperimentSetting":
        """Construye la configuración canónica para un nombre."""
        match name:
            case SettingName.baseline:
                return cls(name=name, uses_dc=False, target_tagged=False)
            case SettingName.oracle:
                return cls(name=name, uses_dc=False, target_tagged=True)
            case SettingName.proposed_a:
                return cls(name=name, uses_dc=True, target_tagged=False)
            case SettingName.proposed_b:
                return cls(
                    name=name,
                    uses_dc=True,
                    target_tagged=False,
                    extra_unlabeled_pool=extra_unlabeled_pool,
                )

    @property
    def uses_target(self) -> bool:
        """La línea base entrena solo con el dominio fuente."""
        return self.name is not SettingName.baseline


@dataclass(frozen=True)
class EvalCondition:
    """Condición de evaluación: limpio (snr_db None) o una SNR en dB."""

    snr_db: float | None = None

    @property
    def is_clean(self) -> bool:
        return self.snr_db is None

    @property
    def label(self) -> str:
        if self.snr_db is None:
            return "clean"
        return f"{self.snr_db:g}dB"

    @classmethod
    def parse(cls, text: str) -> "EvalCondition":
        """Convierte 'clean' o un número (en dB) en una condición."""
        text = text.strip().lower().removesuffix("db")
        if text == "clean":
            return cls()
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"Condición de evaluación no válida: {text!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"Condición de evaluación no válida: {text!r}")
        return cls(snr_db=value)


DEFAULT_CONDITIONS: tuple[EvalCondition, ...] = (
    EvalCondition(),
    EvalCondition(-5.0),
    EvalCondition(0.0),
    EvalCondition(5.0),
    EvalCondition(10.0),
)


@dataclass(frozen=True, eq=False)
class TwoViewBatch:
    """Lote de la etapa 1: dos vistas aumentadas por pista, alineadas por fila."""

    views_a: Waveforms
    views_b: Waveforms
    track_ids: tuple[str, ...]
    noisy_a: npt.NDArray[np.bool_]
    noisy_b: npt.NDArray[np.bool_]

    def __len__(self) -> int:
        return len(self.track_ids)


@dataclass(frozen=True, eq=False)
class Batch:
    """
    Lote de las etapas 2 y 3. La mitad objetivo solo lleva etiquetas en la
    configuración oracle; en las propuestas `trg_tags` es siempre None.
    """

    src_waveforms: Waveforms
    src_tags: npt.NDArray[np.float32]
    src_domain_labels: npt.NDArray[np.float32]
    src_ids: tuple[str, ...]
    trg_waveforms: Waveforms
    trg_domain_labels: npt.NDArray[np.float32]
    trg_ids: tuple[str, ...]
    trg_tags: npt.NDArray[np.float32] | None = None


@dataclass(frozen=True, eq=False)
class EvalItem:
    """Elemento congelado del conjunto de evaluación."""

    track_id: str
    waveform: FloatArray
    tags: npt.NDArray[np.float32]
    condition: EvalCondition


@dataclass(frozen=True, eq=False)
class EvalSet:
    """Conjunto de evaluación congelado: pistas x condiciones."""

    items: tuple[EvalItem, ...]
    conditions: tuple[EvalCondition, ...]
    seed: int

    def __len__(self) -> int:
        return len(self.items)

    def for_condition(self, condition: EvalCondition) -> list[EvalItem]:
        return [item for item in self.items if item.condition == condition]


@dataclass(frozen=True, eq=False)
class DomainProbeSet:
    """Conjunto balanceado de audios limpios (0) y ruidosos (1)."""

    waveforms: Waveforms
    domain_labels: npt.NDArray[np.float32]


@dataclass(frozen=True)
class EncoderConfig:
    """Arquitectura del codificador tipo SampleCNN y del proyector."""

    input_length: int = DEFAULT_INPUT_LENGTH
    n_blocks: int = 9
    base_channels: int = 128
    embedding_dim: int = 512
    projection_dim: int | None = None

    def __post_init__(self) -> None:
        if self.n_blocks < 1 or self.base_channels < 1 or self.embedding_dim < 2:
            raise ConfigError(f"Codificador no válido: {self}")
        # Convolución inicial con stride 3 más un max-pool 3 por bloque
        if self.input_length != 3 ** (self.n_blocks + 1):
            raise ConfigError(
                f"input_length={self.input_length} debe ser 3^(n_blocks+1)"
                f"={3 ** (self.n_blocks + 1)}"
            )
        if self.projection_dim is not None and self.projection_dim < 1:
            raise ConfigError("projection_dim debe ser positivo")

    @property
    def resolved_projection_dim(self) -> int:
        return self.projection_dim or max(1, self.embedding_dim // 4)


@dataclass(frozen=True)
class GrlConfig:
    """Peso adversarial λ y su calendario."""

    weight: float = 1.0
    schedule: LambdaSchedule = LambdaSchedule.constant

    def __post_init__(self) -> None:
        if not math.isfinite(self.weight) or self.weight < 0:
            raise ConfigError(f"lambda debe ser finito y no negativo: {self.weight}")

    def at(self, progress: float) -> float:
        """Valor efectivo de λ para un progreso de entrenamiento en [0, 1]."""
        if self.schedule is LambdaSchedule.constant:
            return self.weight
        progress = min(max(progress, 0.0), 1.0)
        return self.weight * (2.0 / (1.0 + math.exp(-10.0 * progress)) - 1.0)


@dataclass(frozen=True)
class EarlyStop:
    """Regla de parada temprana."""

    metric: str
    patience: int


@dataclass(frozen=True)
class TrainingStagePlan:
    """Descripción declarativa de una etapa de entrenamiento."""

    stage: StageName
    trainable: frozenset[ModelGroup]
    frozen: frozenset[ModelGroup]
    losses: tuple[str, ...]
    learning_rate: float
    max_epochs: int
    batch_size: int
    early_stop: EarlyStop | None = None


@dataclass(frozen=True)
class StageSettings:
    """Hiperparámetros de una etapa tal como aparecen en la configuración."""

    learning_rate: float
    max_epochs: int
    batch_size: int
    patience: int | None = None


@dataclass(frozen=True)
class ManifestPaths:
    """Rutas a los manifiestos que consume un experimento."""

    train: Path = Path("corpus/train.jsonl")
    train_oracle: Path = Path("corpus/train_oracle.jsonl")
    extra: Path = Path("corpus/extra.jsonl")
    valid: Path = Path("corpus/valid.jsonl")
    test: Path = Path("corpus/test.jsonl")
    noise_train: Path = Path("corpus/noise_train.jsonl")
    noise_valid: Path = Path("corpus/noise_valid.jsonl")
    noise_test: Path = Path("corpus/noise_test.jsonl")


@dataclass(frozen=True)
class SynthConfig:
    """Tamaño y forma del corpus sintético de escritorio."""

    n_tracks: int = 200
    n_extra: int = 4
    n_noises: int = 12
    track_duration_s: float = 1.0
    noise_duration_s: float = 1.0
    valid_fraction: float = 0.15
    test_fraction: float = 0.2
    target_fraction: float = 0.5
    write_audio: bool = True
    output_dir: Path = Path("corpus")


@dataclass(frozen=True)
class RunConfig:
    """Configuración completa y resuelta de un experimento."""

    setting: SettingName = SettingName.proposed_a
    seed: int = 0
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ
    n_tags: int = DEFAULT_N_TAGS
    target_rms: float = 0.1
    noise_count: int = 1
    snr_min_db: float = -10.0
    snr_max_db: float = 10.0
    noisy_view_probability: float = 0.5
    gain_jitter_db: float = 3.0
    temperature: float = 0.5
    grl: GrlConfig = field(default_factory=GrlConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    fe_pretrain: StageSettings = field(
        default_factory=lambda: StageSettings(3e-4, 100, 48)
    )
    dc_pretrain: StageSettings = field(
        default_factory=lambda: StageSettings(1e-4, 20, 16)
    )
    finetune: StageSettings = field(
        default_factory=lambda: StageSettings(1e-4, 200, 16, patience=10)
    )
    eval_conditions: tuple[EvalCondition, ...] = DEFAULT_CONDITIONS
    eval_seed: int = 1234
    precision: int = 32
    prefetch: int = 2
    manifests: ManifestPaths = field(default_factory=ManifestPaths)
    synth: SynthConfig = field(default_factory=SynthConfig)
    output_dir: Path = Path("runs/default")

    @property
    def input_length(self) -> int:
        return self.encoder.input_length

    def experiment_setting(self) -> ExperimentSetting:
        """Configuración experimental derivada del nombre y los manifiestos."""
        extra = self.manifests.extra if self.setting is SettingName.proposed_b else None
        return ExperimentSetting.named(self.setting, extra_unlabeled_pool=extra)


@dataclass(frozen=True)
class ConditionMetrics:
    """Métricas macro de una condición de evaluación."""

    condition: EvalCondition
    macro_auc: float | None
    macro_ap: float | None
    n_items: int
    skipped_auc: int = 0
    skipped_ap: int = 0


@dataclass(frozen=True)
class EvalReport:
    """Informe por condición más la precisión de la sonda de dominio."""

    conditions: tuple[ConditionMetrics, ...]
    dc_probe_accuracy: float | None = None
    label: str = ""

    def metrics_for(self, condition: EvalCondition) -> ConditionMetrics:
        for metrics in self.conditions:
            if metrics.condition == condition:
                return metrics
        raise KeyError(condition.label)

    def mean_noisy_auc(self) -> float | None:
        """AUC macro promedio sobre las condiciones ruidosas."""
        values = [
            m.macro_auc
            for m in self.conditions
            if not m.condition.is_clean and m.macro_auc is not None
        ]
        return float(np.mean(values)) if values else None
