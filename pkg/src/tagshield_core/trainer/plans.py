"""
Planes de Etapa - Qué se Entrena, Qué se Congela y con Qué Pérdida
"""

from ..errors import ConfigError
from ..types import (
    EarlyStop,
    ExperimentSetting,
    ModelGroup,
    RunConfig,
    StageName,
    TrainingStagePlan,
)

EARLY_STOP_METRIC = "valid_mean_noisy_auc"

_ALL = frozenset(ModelGroup)


def plan_for(stage: StageName, config: RunConfig) -> TrainingStagePlan:
    """Plan declarativo de una etapa para la configuración dada."""
    setting = config.experiment_setting()
    match stage:
        case StageName.fe_pretrain:
            settings = config.fe_pretrain
            trainable, losses = frozenset({ModelGroup.fe}), ("ntxent",)
            early_stop = None
        case StageName.dc_pretrain:
            if not setting.uses_dc:
                raise ConfigError(f"La configuración {setting.name.value} no tiene etapa de DC")
            settings = config.dc_pretrain
            trainable, losses = frozenset({ModelGroup.dc}), ("bce_domain",)
            early_stop = None
        case StageName.adversarial_finetune:
            settings = config.finetune
            trainable = frozenset({ModelGroup.fe, ModelGroup.lp})
            # Sin DC la última etapa usa solo L_LP
            losses = ("total",) if setting.uses_dc else ("bce_tags",)
            early_stop = (
                EarlyStop(EARLY_STOP_METRIC, settings.patience)
                if settings.patience is not None
                else None
            )
    plan = TrainingStagePlan(
        stage=stage,
        trainable=trainable,
        frozen=_ALL - trainable,
        losses=losses,
        learning_rate=settings.learning_rate,
        max_epochs=settings.max_epochs,
        batch_size=settings.batch_size,
        early_stop=early_stop,
    )
    validate_plan(plan)
    return plan


def validate_plan(plan: TrainingStagePlan) -> None:
    """Comprueba el esquema de congelamiento de cada etapa."""
    if plan.trainable & plan.frozen or plan.trainable | plan.frozen != _ALL:
        raise ConfigError("trainable y frozen deben ser complementarios")
    expected = {
        StageName.fe_pretrain: ({ModelGroup.fe}, {("ntxent",)}),
        StageName.dc_pretrain: ({ModelGroup.dc}, {("bce_domain",)}),
        StageName.adversarial_finetune: (
            {ModelGroup.fe, ModelGroup.lp},
            {("total",), ("bce_tags",)},
        ),
    }
    trainable, losses = expected[plan.stage]
    if set(plan.trainable) != trainable or plan.losses not in losses:
        raise ConfigError(f"Plan no válido para {plan.stage.value}: {plan}")
    if plan.learning_rate <= 0 or plan.max_epochs < 1 or plan.batch_size < 2:
        raise ConfigError(f"Hiperparámetros no válidos en {plan.stage.value}")


def stages_for(setting: ExperimentSetting) -> tuple[StageName, ...]:
    """Baseline y oracle omiten el preentrenamiento del DC."""
    if setting.uses_dc:
        return (StageName.fe_pretrain, StageName.dc_pretrain, StageName.adversarial_finetune)
    return (StageName.fe_pretrain, StageName.adversarial_finetune)
