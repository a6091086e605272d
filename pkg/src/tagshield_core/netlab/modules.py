"""
Modelos - Extractor de Características, Clasificador de Dominio y Predictor

El extractor (FE) es un codificador SampleCNN más un proyector que solo se
usa en el preentrenamiento contrastivo. El clasificador de dominio (DC)
distingue embeddings limpios de ruidosos y el predictor (LP) produce los
logits de las etiquetas. Las tres colecciones viven en ModelParams, que
aplica el esquema de congelamiento de cada etapa.
"""

import logging
from collections.abc import Iterable

import numpy as np
import torch
from torch import Tensor, nn

from ..errors import ShapeMismatch
from ..types import EncoderConfig, ModelGroup
from .params import count_parameters, set_frozen

logger = logging.getLogger(__name__)

# Margen para que la salida del DC quede estrictamente en (0, 1)
PROBABILITY_EPS = 1e-6


def channel_widths(config: EncoderConfig) -> list[int]:
    """Anchos de los bloques, en progresión geométrica hasta embedding_dim."""
    widths = np.geomspace(config.base_channels, config.embedding_dim, config.n_blocks)
    result = [int(round(width)) for width in widths]
    result[-1] = config.embedding_dim
    return result


class Encoder(nn.Module):
    """
    Pila tipo SampleCNN: conv inicial de paso 3 y n_blocks bloques
    (conv 3 -> BN -> ReLU -> max-pool 3). Una entrada de 3^(n_blocks+1)
    muestras se reduce a un único paso temporal.
    """

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__()
        self.config = config
        layers: list[nn.Module] = [
            nn.Conv1d(1, config.base_channels, kernel_size=3, stride=3),
            nn.BatchNorm1d(config.base_channels),
            nn.ReLU(),
        ]
        in_channels = config.base_channels
        for width in channel_widths(config):
            layers += [
                nn.Conv1d(in_channels, width, kernel_size=3, padding=1),
                nn.BatchNorm1d(width),
                nn.ReLU(),
                nn.MaxPool1d(3),
            ]
            in_channels = width
        self.layers = nn.Sequential(*layers)

    def forward(self, waveforms: Tensor) -> Tensor:
        return self.layers(waveforms.unsqueeze(1)).squeeze(-1)


class Projector(nn.Module):
    def __init__(self, embedding_dim: int, projection_dim: int) -> None:
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(embedding_dim, embedding_dim),
            nn.ReLU(),
            nn.Linear(embedding_dim, projection_dim),
        )

    def forward(self, embeddings: Tensor) -> Tensor:
        return self.layers(embeddings)


class FeatureExtractor(nn.Module):
    """Codificador más proyector; forward devuelve el embedding."""

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__()
        self.config = config
        self.encoder = Encoder(config)
        self.projector = Projector(config.embedding_dim, config.resolved_projection_dim)

    def forward(self, waveforms: Tensor) -> Tensor:
        return self.encoder(waveforms)


class DomainClassifier(nn.Module):
    """embedding -> 256 -> 64 -> 1 con BN y ReLU entre capas y salida sigmoide."""

    def __init__(self, embedding_dim: int) -> None:
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(embedding_dim, 256),
            nn.BatchNorm1d(256),
            nn.ReLU(),
            nn.Linear(256, 64),
            nn.BatchNorm1d(64),
            nn.ReLU(),
            nn.Linear(64, 1),
        )

    def forward(self, embeddings: Tensor) -> Tensor:
        probabilities = torch.sigmoid(self.layers(embeddings).squeeze(-1))
        return probabilities.clamp(PROBABILITY_EPS, 1.0 - PROBABILITY_EPS)


class LabelPredictor(nn.Module):
    """Dos capas lineales con ReLU en medio; devuelve logits sin activación."""

    def __init__(self, embedding_dim: int, n_tags: int) -> None:
        super().__init__()
        hidden = max(1, embedding_dim // 2)
        self.hidden = nn.Linear(embedding_dim, hidden)
        self.output = nn.Linear(hidden, n_tags)

    def forward(self, embeddings: Tensor) -> Tensor:
        return self.output(torch.relu(self.hidden(embeddings)))


class ModelParams(nn.Module):
    """
    Las tres colecciones de parámetros del sistema. `configure` deja
    entrenables solo los grupos indicados y congela por completo el resto
    (gradientes y estadísticas de normalización).
    """

    def __init__(self, config: EncoderConfig, n_tags: int) -> None:
        super().__init__()
        self.config = config
        self.n_tags = n_tags
        self.fe = FeatureExtractor(config)
        self.dc = DomainClassifier(config.embedding_dim)
        self.lp = LabelPredictor(config.embedding_dim, n_tags)

    def group(self, group: ModelGroup) -> nn.Module:
        match group:
            case ModelGroup.fe:
                return self.fe
            case ModelGroup.dc:
                return self.dc
            case ModelGroup.lp:
                return self.lp

    def configure(self, trainable: Iterable[ModelGroup]) -> None:
        active = set(trainable)
        for group in ModelGroup:
            set_frozen(self.group(group), group not in active)
        self.training = bool(active)

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [parameter for parameter in self.parameters() if parameter.requires_grad]

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def describe(self) -> str:
        sizes = ", ".join(
            f"{group.value}={count_parameters(self.group(group))}" for group in ModelGroup
        )
        return f"ModelParams({sizes})"


def build_model(config: EncoderConfig, n_tags: int, seed: int, precision: int = 32) -> ModelParams:
    """Inicialización determinista por semilla, en 32 o 64 bits."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = ModelParams(config, n_tags)
    if precision == 64:
        model = model.double()
    logger.debug("Modelo construido: %s", model.describe())
    return model


def as_input(waveforms: Tensor | np.ndarray, model: nn.Module) -> Tensor:
    """Convierte un lote a tensor con el dtype del modelo."""
    dtype = next(model.parameters()).dtype
    if isinstance(waveforms, np.ndarray):
        return torch.from_numpy(np.ascontiguousarray(waveforms)).to(dtype)
    return waveforms.to(dtype)


def _check_last_dim(tensor: Tensor, expected: int, what: str) -> None:
    if tensor.dim() != 2 or tensor.shape[-1] != expected:
        raise ShapeMismatch(f"{what}: forma {tuple(tensor.shape)}, se esperaba [lote, {expected}]")


def fe_forward(params: ModelParams, waveforms: Tensor | np.ndarray) -> Tensor:
    """Embeddings [lote x embedding_dim] de un lote de formas de onda."""
    x = as_input(waveforms, params)
    _check_last_dim(x, params.config.input_length, "Formas de onda")
    return params.fe(x)


def projector_forward(params: ModelParams, embeddings: Tensor) -> Tensor:
    _check_last_dim(embeddings, params.config.embedding_dim, "Embeddings")
    return params.fe.projector(embeddings)


def dc_forward(params: ModelParams, embeddings: Tensor) -> Tensor:
    """Probabilidad de dominio objetivo por elemento, en (0, 1)."""
    _check_last_dim(embeddings, params.config.embedding_dim, "Embeddings")
    return params.dc(embeddings)


def lp_forward(params: ModelParams, embeddings: Tensor) -> Tensor:
    _check_last_dim(embeddings, params.config.embedding_dim, "Embeddings")
    return params.lp(embeddings)
