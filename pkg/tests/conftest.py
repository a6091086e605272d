from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from tagshield_core.corpus import CachedClipStore, DeskCorpus, generate_desk_corpus
from tagshield_core.trainer import RunDirectory, TrainingCorpus
from tagshield_core.types import (
    AudioClip,
    EncoderConfig,
    RunConfig,
    SettingName,
    StageSettings,
    SynthConfig,
)

SAMPLE_RATE_HZ = 22050

# 3^5 muestras: cuatro bloques tras la convolución inicial
TINY_ENCODER = EncoderConfig(input_length=243, n_blocks=4, base_channels=4, embedding_dim=16)


def sine(frequency_hz: float, n_samples: int, sample_rate_hz: int = SAMPLE_RATE_HZ) -> AudioClip:
    t = np.arange(n_samples) / sample_rate_hz
    return AudioClip(np.sin(2 * np.pi * frequency_hz * t), sample_rate_hz)


def random_clip(rng: np.random.Generator, n_samples: int, level: float = 0.1) -> AudioClip:
    samples = rng.standard_normal(n_samples)
    return AudioClip(samples * level / np.sqrt(np.mean(samples**2)), SAMPLE_RATE_HZ)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def synth_config(tmp_path: Path) -> SynthConfig:
    return SynthConfig(
        n_tracks=40,
        n_extra=4,
        n_noises=6,
        track_duration_s=0.05,
        noise_duration_s=0.05,
        write_audio=False,
        output_dir=tmp_path / "corpus",
    )


@pytest.fixture
def desk_corpus(synth_config: SynthConfig) -> DeskCorpus:
    return generate_desk_corpus(synth_config, seed=0, sample_rate_hz=SAMPLE_RATE_HZ)


@pytest.fixture
def store() -> CachedClipStore:
    return CachedClipStore(SAMPLE_RATE_HZ)


@pytest.fixture
def run_config(desk_corpus: DeskCorpus, synth_config: SynthConfig, tmp_path: Path) -> RunConfig:
    return RunConfig(
        setting=SettingName.proposed_a,
        seed=0,
        sample_rate_hz=SAMPLE_RATE_HZ,
        n_tags=8,
        encoder=TINY_ENCODER,
        fe_pretrain=StageSettings(1e-3, 2, 4),
        dc_pretrain=StageSettings(1e-3, 2, 4),
        finetune=StageSettings(1e-3, 2, 4, patience=5),
        prefetch=2,
        manifests=desk_corpus.manifests,
        synth=synth_config,
        output_dir=tmp_path / "runs",
    )


def with_setting(config: RunConfig, setting: SettingName) -> RunConfig:
    return replace(config, setting=setting)


def make_run(config: RunConfig, name: str) -> tuple[TrainingCorpus, RunDirectory]:
    """Corpus y directorio preparados para una etapa."""
    run_dir = RunDirectory(config.output_dir / name)
    run_dir.prepare(force=True)
    return TrainingCorpus.from_config(config), run_dir
