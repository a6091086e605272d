import argparse
import asyncio
import logging
import shutil
from collections.abc import Callable
from dataclasses import replace
from pathlib import Path
from types import CoroutineType
from typing import Any

from tagshield_core.corpus import (
    CachedClipStore,
    build_eval_set,
    generate_desk_corpus,
    load_manifest,
    load_noise_manifest,
)
from tagshield_core.errors import OutputExists
from tagshield_core.evalkit import evaluate, format_table, read_report, write_report
from tagshield_core.netlab import build_model
from tagshield_core.trainer import (
    Checkpoint,
    RunDirectory,
    StageResult,
    Trainer,
    TrainingCorpus,
    load_checkpoint,
)
from tagshield_core.types import RunConfig

logger = logging.getLogger(__name__)

type Command = Callable[[argparse.Namespace], CoroutineType[Any, Any, None]]

# Subdirectorio de cada subcomando dentro de --out
STAGE_DIRS = {
    "pretrain-fe": "pretrain-fe",
    "pretrain-dc": "pretrain-dc",
    "train": "train",
    "eval": "eval",
}


class TagShieldCli:
    """
    Interfaz de línea de comandos de TagShield.
    Cada subcomando escribe su instantánea de configuración en su directorio
    de ejecución y delega el trabajo pesado en un hilo.
    """

    def __init__(self, config: RunConfig, force: bool = False, progress: bool = False) -> None:
        self.config: RunConfig = config
        self.force: bool = force
        self.progress: bool = progress
        # Registro de subcomandos
        self.command_registry: dict[str, Command] = {
            "synth": self.synth,
            "pretrain-fe": self.pretrain_fe,
            "pretrain-dc": self.pretrain_dc,
            "train": self.train,
            "eval": self.eval_checkpoint,
            "report": self.report,
        }

    async def run(self, command: str, args: argparse.Namespace) -> None:
        handler = self.command_registry.get(command)
        if handler is None:
            raise ValueError(f"Subcomando desconocido: {command}")
        await handler(args)

    def run_dir(self, command: str) -> RunDirectory:
        return RunDirectory(self.config.output_dir / STAGE_DIRS[command])

    def default_checkpoint(self, command: str) -> Path:
        return self.run_dir(command).final_checkpoint

    async def synth(self, args: argparse.Namespace) -> None:
        """Genera el corpus sintético de escritorio y sus manifiestos."""
        synth = self.config.synth
        if args.out:
            synth = replace(synth, output_dir=Path(args.out))
        target = synth.output_dir
        if target.exists() and any(target.iterdir()):
            if not self.force:
                raise OutputExists(f"El directorio {target} ya existe; usa --force para sobrescribirlo")
            logger.warning("Borrando el corpus previo de %s", target)
            await asyncio.to_thread(shutil.rmtree, target)
        target.mkdir(parents=True, exist_ok=True)
        await asyncio.to_thread(
            RunDirectory(target).write_config, replace(self.config, synth=synth)
        )
        corpus = await asyncio.to_thread(
            generate_desk_corpus,
            synth,
            self.config.seed,
            self.config.sample_rate_hz,
            self.progress,
        )
        await asyncio.to_thread(
            print,
            f"Corpus escrito en {synth.output_dir}: {len(corpus.tracks)} pistas, "
            f"{len(corpus.extra)} extra, {len(corpus.noises)} ruidos",
        )

    async def _stage(
        self,
        command: str,
        args: argparse.Namespace,
        work: Callable[[Trainer, Checkpoint | None], StageResult],
    ) -> None:
        run_dir = self.run_dir(command)
        resume = load_checkpoint(Path(args.resume)) if args.resume else None
        if resume is not None:
            resume.check_config(self.config)
        await asyncio.to_thread(run_dir.prepare, self.force, resume is not None)
        await asyncio.to_thread(run_dir.write_config, self.config)
        corpus = await asyncio.to_thread(TrainingCorpus.from_config, self.config)
        trainer = Trainer(self.config, corpus, run_dir, self.progress)
        result = await asyncio.to_thread(work, trainer, resume)
        status = "completada" if result.finished else "interrumpida"
        last = result.history[-1] if result.history else {}
        await asyncio.to_thread(
            print,
            f"Etapa {result.stage.value} {status}: {len(result.history)} épocas, "
            f"pérdida final {last.get('loss', float('nan')):.5f}, "
            f"checkpoint {result.checkpoint_path}",
        )

    async def pretrain_fe(self, args: argparse.Namespace) -> None:
        """Etapa 1: preentrenamiento contrastivo del FE."""
        await self._stage(
            "pretrain-fe",
            args,
            lambda trainer, resume: trainer.run_stage1(resume, args.stop_after_epoch),
        )

    async def pretrain_dc(self, args: argparse.Namespace) -> None:
        """Etapa 2: preentrenamiento del DC con el FE congelado."""

        def work(trainer: Trainer, resume: Checkpoint | None) -> StageResult:
            fe = None
            if resume is None:
                path = Path(args.fe_checkpoint or self.default_checkpoint("pretrain-fe"))
                fe = load_checkpoint(path)
            return trainer.run_stage2(fe, resume, args.stop_after_epoch)

        await self._stage("pretrain-dc", args, work)

    async def train(self, args: argparse.Namespace) -> None:
        """Etapa 3: ajuste fino adversarial (o solo del LP en baseline y oracle)."""
        setting = self.config.experiment_setting()

        def work(trainer: Trainer, resume: Checkpoint | None) -> StageResult:
            fe = dc = None
            if resume is None:
                fe_path = Path(args.fe_checkpoint or self.default_checkpoint("pretrain-fe"))
                fe = load_checkpoint(fe_path)
                # Baseline y oracle no usan el DC
                if setting.uses_dc:
                    dc_path = Path(args.dc_checkpoint or self.default_checkpoint("pretrain-dc"))
                    dc = load_checkpoint(dc_path)
            return trainer.run_stage3(fe, dc, resume, args.stop_after_epoch)

        await self._stage("train", args, work)

    async def eval_checkpoint(self, args: argparse.Namespace) -> None:
        """Evalúa un checkpoint sobre el conjunto de prueba en cada condición."""
        config = self.config
        run_dir = self.run_dir("eval")
        checkpoint_path = Path(args.checkpoint or self.default_checkpoint("train"))
        checkpoint = await asyncio.to_thread(load_checkpoint, checkpoint_path)
        checkpoint.check_encoder(config)
        await asyncio.to_thread(run_dir.prepare, self.force)
        await asyncio.to_thread(run_dir.write_config, config)

        manifest = Path(args.manifest) if args.manifest else config.manifests.test
        noise_manifest = (
            Path(args.noise_manifest) if args.noise_manifest else config.manifests.noise_test
        )
        records = await asyncio.to_thread(load_manifest, manifest, config.n_tags)
        noises = await asyncio.to_thread(load_noise_manifest, noise_manifest)
        store = CachedClipStore(config.sample_rate_hz)
        eval_set = await asyncio.to_thread(
            build_eval_set,
            store,
            records,
            noises,
            config.eval_conditions,
            config.eval_seed,
            config.input_length,
            config.noise_count,
        )

        model = build_model(config.encoder, config.n_tags, config.seed, config.precision)
        model.load_state_dict(checkpoint.model_state)
        label = str(checkpoint.config.get("setting", ""))
        report = await asyncio.to_thread(evaluate, model, eval_set, label)
        await asyncio.to_thread(write_report, report, run_dir.root)
        await asyncio.to_thread(print, format_table([report]))

    async def report(self, args: argparse.Namespace) -> None:
        """Reúne los informes de varias ejecuciones en una sola tabla."""
        reports = []
        for item in args.runs:
            path = Path(item)
            if path.is_dir():
                path = path / STAGE_DIRS["eval"] / "report.jsonl"
            reports.append(await asyncio.to_thread(read_report, path))
        table = format_table(reports)
        if args.out:
            target = Path(args.out) / "report.txt"
            if target.exists() and not self.force:
                raise OutputExists(f"{target} ya existe; usa --force para sobrescribirlo")
            target.parent.mkdir(parents=True, exist_ok=True)
            await asyncio.to_thread(target.write_text, table, encoding="utf-8")
        await asyncio.to_thread(print, table)
