"""
Entrenador - Coordinador de las Tres Etapas

Este módulo implementa el entrenador que coordina el modelo, el corpus y el
directorio de ejecución: preentrenamiento contrastivo del FE, preentrenamiento
del DC con el FE congelado y ajuste fino adversarial del FE y el LP con el DC
congelado. Cada época escribe métricas y un checkpoint desde el que se puede
reanudar de forma determinista.
"""

import logging
from collections import defaultdict
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import torch
from torch import Tensor
from tqdm import tqdm

from ..corpus import (
    Prefetcher,
    SamplingOptions,
    Stage1Sampler,
    Stage23Sampler,
    build_domain_probe_set,
    build_eval_set,
)
from ..errors import (
    ConfigMismatch,
    DivergenceDetected,
    EmptyPool,
    MissingCheckpoint,
    TagShieldRuntimeError,
)
from ..evalkit import evaluate, probe_accuracy
from ..mappers import config_to_dict
from ..netlab import ModelParams, build_model, param_checksum
from ..types import Batch, ModelGroup, RunConfig, StageName, TrainingStagePlan, TwoViewBatch
from .checkpoint import Checkpoint, EarlyStopState, load_checkpoint, save_checkpoint
from .data import TrainingCorpus
from .plans import plan_for
from .run_dir import MetricsLog, RunDirectory
from .steps import contrastive_loss, domain_loss, finetune_terms

logger = logging.getLogger(__name__)

STAGE_INDEX: dict[StageName, int] = {
    StageName.fe_pretrain: 1,
    StageName.dc_pretrain: 2,
    StageName.adversarial_finetune: 3,
}

type StepFn[B] = Callable[[B, float], tuple[Tensor, dict[str, float]]]
type ValidateFn = Callable[[ModelParams], dict[str, Any]]


@dataclass(frozen=True)
class StageResult:
    """Resultado de una etapa (completa o interrumpida)."""

    stage: StageName
    model: ModelParams
    history: tuple[dict[str, Any], ...]
    checkpoint_path: Path
    finished: bool
    frozen_checksums: dict[ModelGroup, str]


def clone_state(model: ModelParams) -> dict[str, Tensor]:
    return {name: tensor.detach().clone() for name, tensor in model.state_dict().items()}


def load_group(model: ModelParams, state: dict[str, Tensor], group: ModelGroup) -> None:
    """Carga solo los parámetros de un grupo desde un state_dict completo."""
    prefix = f"{group.value}."
    subset = {name[len(prefix) :]: t for name, t in state.items() if name.startswith(prefix)}
    if not subset:
        raise ConfigMismatch(f"El checkpoint no contiene parámetros de {group.value}")
    model.group(group).load_state_dict(subset)


class Trainer:
    """
    Coordinador del entrenamiento. Es dueño exclusivo de los parámetros
    durante cada paso; los lotes se preparan en un hilo de precarga.
    """

    def __init__(
        self,
        config: RunConfig,
        corpus: TrainingCorpus,
        run_dir: RunDirectory,
        progress: bool = False,
    ) -> None:
        # Guardamos la configuración resuelta
        self.config: RunConfig = config

        # Guardamos el corpus y el directorio de ejecución
        self.corpus: TrainingCorpus = corpus
        self.run_dir: RunDirectory = run_dir
        self.metrics = MetricsLog(run_dir.metrics_path)

        self.options = SamplingOptions.from_config(config)
        self.progress: bool = progress

    def epoch_rng(self, stage: StageName, epoch: int, half: int) -> np.random.Generator:
        """Generador propio de cada (semilla, etapa, época, mitad)."""
        return np.random.default_rng([self.config.seed, STAGE_INDEX[stage], epoch, half])

    def new_model(self) -> ModelParams:
        return build_model(
            self.config.encoder, self.config.n_tags, self.config.seed, self.config.precision
        )

    # Etapa 1

    def run_stage1(
        self, resume: Checkpoint | None = None, stop_after_epoch: int | None = None
    ) -> StageResult:
        """Preentrenamiento contrastivo del codificador y el proyector."""
        plan = plan_for(StageName.fe_pretrain, self.config)
        model = self.new_model()
        sampler = Stage1Sampler(
            self.corpus.store,
            self.corpus.train_split,
            self.corpus.noise_train,
            self.options,
        )

        def batches(epoch: int) -> Iterator[TwoViewBatch]:
            return sampler.epoch(plan.batch_size, self.epoch_rng(plan.stage, epoch, 0))

        def step(batch: TwoViewBatch, progress: float) -> tuple[Tensor, dict[str, float]]:
            return contrastive_loss(model, batch, self.config.temperature), {}

        n_batches = sampler.batches_per_epoch(plan.batch_size)
        return self._train(plan, model, batches, step, None, n_batches, resume, stop_after_epoch)

    # Etapa 2

    def run_stage2(
        self,
        fe_checkpoint: Checkpoint | None,
        resume: Checkpoint | None = None,
        stop_after_epoch: int | None = None,
    ) -> StageResult:
        """Preentrenamiento del DC sobre embeddings del FE congelado."""
        plan = plan_for(StageName.dc_pretrain, self.config)
        model = self.new_model()
        if resume is None:
            fe_checkpoint = self._require(fe_checkpoint, StageName.fe_pretrain)
            load_group(model, fe_checkpoint.model_state, ModelGroup.fe)

        sampler = self._stage23_sampler()
        probe = build_domain_probe_set(
            self.corpus.store,
            self.corpus.valid,
            self.corpus.noise_valid,
            self.config.eval_seed,
            self.config.input_length,
            self.config.target_rms,
            self.config.noise_count,
            (self.config.snr_min_db, self.config.snr_max_db),
        )

        def batches(epoch: int) -> Iterator[Batch]:
            return sampler.epoch(
                plan.batch_size,
                self.epoch_rng(plan.stage, epoch, 0),
                self.epoch_rng(plan.stage, epoch, 1),
            )

        def step(batch: Batch, progress: float) -> tuple[Tensor, dict[str, float]]:
            loss, accuracy = domain_loss(model, batch)
            return loss, {"train_dc_accuracy": accuracy}

        def validate(model: ModelParams) -> dict[str, Any]:
            return {
                "valid_dc_accuracy": probe_accuracy(model, probe.waveforms, probe.domain_labels)
            }

        n_batches = sampler.batches_per_epoch(plan.batch_size)
        return self._train(plan, model, batches, step, validate, n_batches, resume, stop_after_epoch)

    # Etapa 3

    def run_stage3(
        self,
        fe_checkpoint: Checkpoint | None,
        dc_checkpoint: Checkpoint | None = None,
        resume: Checkpoint | None = None,
        stop_after_epoch: int | None = None,
    ) -> StageResult:
        """
        Ajuste fino del FE y entrenamiento del LP con el DC congelado. Sin DC
        (baseline, oracle) la pérdida es solo la del LP.
        """
        plan = plan_for(StageName.adversarial_finetune, self.config)
        setting = self.config.experiment_setting()
        model = self.new_model()
        if resume is None:
            # Orden de etapas: el FE siempre viene de la etapa 1
            fe_checkpoint = self._require(fe_checkpoint, StageName.fe_pretrain)
            load_group(model, fe_checkpoint.model_state, ModelGroup.fe)
            # Y el DC de la etapa 2 en las configuraciones propuestas
            if setting.uses_dc:
                dc_checkpoint = self._require(dc_checkpoint, StageName.dc_pretrain)
                load_group(model, dc_checkpoint.model_state, ModelGroup.dc)

        sampler = self._stage23_sampler()
        eval_set = build_eval_set(
            self.corpus.store,
            self.corpus.tagged_valid,
            self.corpus.noise_valid,
            self.config.eval_conditions,
            self.config.eval_seed,
            self.config.input_length,
            self.config.noise_count,
        )

        def batches(epoch: int) -> Iterator[Batch]:
            return sampler.epoch(
                plan.batch_size,
                self.epoch_rng(plan.stage, epoch, 0),
                self.epoch_rng(plan.stage, epoch, 1),
            )

        def step(batch: Batch, progress: float) -> tuple[Tensor, dict[str, float]]:
            weight = self.config.grl.at(progress) if setting.uses_dc else 0.0
            terms = finetune_terms(model, batch, weight)
            return terms.total, {
                "lp_loss": float(terms.lp_src.detach()),
                "dc_loss": float((terms.dc_src + terms.dc_trg).detach()),
                "lambda": weight,
            }

        def validate(model: ModelParams) -> dict[str, Any]:
            report = evaluate(model, eval_set)
            record: dict[str, Any] = {}
            for metrics in report.conditions:
                record[f"valid_auc_{metrics.condition.label}"] = metrics.macro_auc
                record[f"valid_ap_{metrics.condition.label}"] = metrics.macro_ap
            record["valid_mean_noisy_auc"] = report.mean_noisy_auc()
            record["valid_dc_probe_accuracy"] = report.dc_probe_accuracy
            return record

        n_batches = sampler.batches_per_epoch(plan.batch_size)
        return self._train(plan, model, batches, step, validate, n_batches, resume, stop_after_epoch)

    # Bucle común

    def _stage23_sampler(self) -> Stage23Sampler:
        return Stage23Sampler(
            self.corpus.store,
            self.corpus.train,
            self.config.experiment_setting(),
            self.corpus.noise_train,
            self.options,
            self.corpus.extra,
        )

    def _require(self, checkpoint: Checkpoint | None, stage: StageName) -> Checkpoint:
        if checkpoint is None:
            raise MissingCheckpoint(f"Se requiere el checkpoint de {stage.value}")
        if checkpoint.stage is not stage:
            raise MissingCheckpoint(
                f"Se esperaba un checkpoint de {stage.value}, no de {checkpoint.stage.value}"
            )
        checkpoint.check_encoder(self.config)
        return checkpoint

    def _train[B](
        self,
        plan: TrainingStagePlan,
        model: ModelParams,
        batches: Callable[[int], Iterator[B]],
        step: StepFn[B],
        validate: ValidateFn | None,
        n_batches: int,
        resume: Checkpoint | None,
        stop_after_epoch: int | None,
    ) -> StageResult:
        if n_batches < 1:
            raise EmptyPool(f"No hay lotes suficientes para {plan.stage.value}")

        # Dejamos entrenables solo los grupos del plan
        model.configure(plan.trainable)
        optimizer = torch.optim.Adam(model.trainable_parameters(), lr=plan.learning_rate)
        torch.manual_seed(self.config.seed)

        history: list[dict[str, Any]] = []
        early_stop = EarlyStopState()
        start = 1

        # Si reanudamos, restauramos todo el estado guardado
        if resume is not None:
            resume.check_config(self.config)
            if resume.stage is not plan.stage:
                raise ConfigMismatch(
                    f"El checkpoint es de {resume.stage.value}, no de {plan.stage.value}"
                )
            model.load_state_dict(resume.model_state)
            if resume.optimizer_state is not None:
                optimizer.load_state_dict(resume.optimizer_state)
            if resume.torch_rng_state is not None:
                torch.set_rng_state(resume.torch_rng_state)
            history = list(resume.history)
            early_stop = resume.early_stop
            start = resume.epoch + 1
            logger.info("Reanudando %s desde la época %d", plan.stage.value, resume.epoch)
        self.metrics.rewrite(history)

        frozen_before = {group: param_checksum(model.group(group)) for group in plan.frozen}
        last_path = self.run_dir.final_checkpoint
        exhausted = plan.early_stop is not None and early_stop.bad_epochs >= plan.early_stop.patience
        if (resume is not None and resume.finished) or exhausted:
            start = plan.max_epochs + 1

        for epoch in range(start, plan.max_epochs + 1):
            model.configure(plan.trainable)
            sums: dict[str, float] = defaultdict(float)
            count = 0

            with Prefetcher(batches(epoch), self.config.prefetch) as stream:
                for batch in tqdm(
                    stream,
                    desc=f"{plan.stage.value} {epoch}/{plan.max_epochs}",
                    total=n_batches,
                    disable=not self.progress,
                    leave=False,
                ):
                    # Progreso del entrenamiento en [0, 1] para el calendario de λ
                    progress = (epoch - 1 + count / n_batches) / plan.max_epochs
                    loss, extras = step(batch, progress)

                    # Una pérdida no finita aborta la etapa con diagnóstico
                    if not bool(torch.isfinite(loss)):
                        raise DivergenceDetected(
                            f"Pérdida no finita en {plan.stage.value}, época {epoch}, "
                            f"lote {count}: {float(loss)}"
                        )

                    optimizer.zero_grad(set_to_none=True)
                    loss.backward()  # type: ignore[no-untyped-call]
                    optimizer.step()

                    sums["loss"] += float(loss.detach())
                    for key, value in extras.items():
                        sums[key] += value
                    count += 1

            if count == 0:
                raise EmptyPool(f"La época {epoch} de {plan.stage.value} no produjo lotes")

            record: dict[str, Any] = {"stage": plan.stage.value, "epoch": epoch}
            record |= {key: value / count for key, value in sorted(sums.items())}
            if validate is not None:
                record |= validate(model)
            stop = self._update_early_stop(plan, record, early_stop, model, epoch)

            history.append(record)
            self.metrics.append(record)
            logger.info(
                "%s época %d: pérdida %.5f", plan.stage.value, epoch, record["loss"]
            )

            last_path = save_checkpoint(
                self.run_dir.epoch_checkpoint(epoch),
                self._checkpoint(plan, epoch, model, optimizer, history, early_stop, False),
            )
            if stop:
                logger.info(
                    "Parada temprana en la época %d (mejor época %s)",
                    epoch,
                    early_stop.best_epoch,
                )
                break
            interrupted = stop_after_epoch is not None and epoch >= stop_after_epoch
            if interrupted and epoch < plan.max_epochs:
                logger.info("Interrumpido tras la época %d", epoch)
                return StageResult(
                    stage=plan.stage,
                    model=model,
                    history=tuple(history),
                    checkpoint_path=last_path,
                    finished=False,
                    frozen_checksums=frozen_before,
                )

        # Restauramos el mejor estado según la parada temprana
        if early_stop.best_model_state is not None:
            model.load_state_dict(early_stop.best_model_state)

        for group, checksum in frozen_before.items():
            if param_checksum(model.group(group)) != checksum:
                raise TagShieldRuntimeError(
                    f"Los parámetros congelados de {group.value} cambiaron en {plan.stage.value}"
                )

        last_epoch = history[-1]["epoch"] if history else 0
        final = self._checkpoint(plan, last_epoch, model, optimizer, history, early_stop, True)
        path = save_checkpoint(self.run_dir.final_checkpoint, final)
        return StageResult(
            stage=plan.stage,
            model=model,
            history=tuple(history),
            checkpoint_path=path,
            finished=True,
            frozen_checksums=frozen_before,
        )

    def _update_early_stop(
        self,
        plan: TrainingStagePlan,
        record: dict[str, Any],
        state: EarlyStopState,
        model: ModelParams,
        epoch: int,
    ) -> bool:
        """Actualiza el estado y devuelve True cuando se agota la paciencia."""
        if plan.early_stop is None:
            return False
        value = record.get(plan.early_stop.metric)
        if value is not None and (state.best_metric is None or value > state.best_metric):
            state.best_metric = float(value)
            state.best_epoch = epoch
            state.bad_epochs = 0
            state.best_model_state = clone_state(model)
            return False
        state.bad_epochs += 1
        return state.bad_epochs >= plan.early_stop.patience

    def _checkpoint(
        self,
        plan: TrainingStagePlan,
        epoch: int,
        model: ModelParams,
        optimizer: torch.optim.Optimizer,
        history: list[dict[str, Any]],
        early_stop: EarlyStopState,
        finished: bool,
    ) -> Checkpoint:
        return Checkpoint(
            stage=plan.stage,
            epoch=epoch,
            config=config_to_dict(self.config),
            model_state=model.state_dict(),
            optimizer_state=optimizer.state_dict(),
            torch_rng_state=torch.get_rng_state(),
            history=list(history),
            early_stop=early_stop,
            finished=finished,
        )


# Atajos funcionales


def run_stage1(
    config: RunConfig,
    corpus: TrainingCorpus,
    run_dir: RunDirectory,
    stop_after_epoch: int | None = None,
    progress: bool = False,
) -> StageResult:
    return Trainer(config, corpus, run_dir, progress).run_stage1(None, stop_after_epoch)


def run_stage2(
    config: RunConfig,
    corpus: TrainingCorpus,
    run_dir: RunDirectory,
    fe_checkpoint: Path,
    stop_after_epoch: int | None = None,
    progress: bool = False,
) -> StageResult:
    fe = load_checkpoint(fe_checkpoint)
    return Trainer(config, corpus, run_dir, progress).run_stage2(fe, None, stop_after_epoch)


def run_stage3(
    config: RunConfig,
    corpus: TrainingCorpus,
    run_dir: RunDirectory,
    fe_checkpoint: Path,
    dc_checkpoint: Path | None = None,
    stop_after_epoch: int | None = None,
    progress: bool = False,
) -> StageResult:
    fe = load_checkpoint(fe_checkpoint)
    dc = load_checkpoint(dc_checkpoint) if dc_checkpoint is not None else None
    trainer = Trainer(config, corpus, run_dir, progress)
    return trainer.run_stage3(fe, dc, None, stop_after_epoch)


def resume(
    checkpoint_path: Path,
    config: RunConfig,
    corpus: TrainingCorpus,
    run_dir: RunDirectory,
    stop_after_epoch: int | None = None,
    progress: bool = False,
) -> StageResult:
    """Continúa la etapa del checkpoint tras verificar su integridad y configuración."""
    checkpoint = load_checkpoint(checkpoint_path)
    checkpoint.check_config(config)
    trainer = Trainer(config, corpus, run_dir, progress)
    match checkpoint.stage:
        case StageName.fe_pretrain:
            return trainer.run_stage1(checkpoint, stop_after_epoch)
        case StageName.dc_pretrain:
            return trainer.run_stage2(None, checkpoint, stop_after_epoch)
        case StageName.adversarial_finetune:
            return trainer.run_stage3(None, None, checkpoint, stop_after_epoch)
