"""
Evaluación - Métricas de Ranking, Informe por Condición y Sonda de Dominio

Este módulo implementa desde cero el AUC ROC (forma de rangos promediados,
empates con crédito 1/2) y la precisión media no interpolada, su promedio
macro por etiqueta, la evaluación de un modelo sobre un conjunto congelado y
la serialización del informe en JSON por líneas y en tabla legible.
"""

import json
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import torch
from scipy.stats import rankdata

from .errors import AllTagsDegenerate, DegenerateLabels, ParseError
from .netlab import ModelParams, dc_forward, fe_forward, lp_forward
from .types import ConditionMetrics, EvalCondition, EvalReport, EvalSet, FloatArray

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 64

type Metric = Callable[[npt.ArrayLike, npt.ArrayLike], float]


def _as_binary(labels: npt.ArrayLike) -> npt.NDArray[np.bool_]:
    array = np.asarray(labels)
    if not np.all((array == 0) | (array == 1)):
        raise DegenerateLabels("Las etiquetas deben valer 0 o 1")
    return array.astype(bool)


def roc_auc(scores: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """
    Estadístico de Mann-Whitney: fracción de pares (positivo, negativo) en los
    que el positivo puntúa más alto; los empates cuentan 1/2.
    """
    values = np.asarray(scores, dtype=np.float64).reshape(-1)
    positive = _as_binary(labels).reshape(-1)
    if values.shape != positive.shape:
        raise ValueError(f"{values.shape} puntuaciones frente a {positive.shape} etiquetas")
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("AUC indefinido: se necesita al menos un positivo y un negativo")
    ranks = rankdata(values, method="average")
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """
    Media, sobre los positivos en orden descendente de puntuación, de la
    precisión en el rango de cada positivo. Empates: orden estable de entrada.
    """
    values = np.asarray(scores, dtype=np.float64).reshape(-1)
    positive = _as_binary(labels).reshape(-1)
    if values.shape != positive.shape:
        raise ValueError(f"{values.shape} puntuaciones frente a {positive.shape} etiquetas")
    if not positive.any():
        raise DegenerateLabels("AP indefinido: no hay positivos")
    order = np.argsort(-values, kind="stable")
    hits = positive[order]
    ranks = np.flatnonzero(hits) + 1
    precision_at_hits = np.arange(1, ranks.size + 1) / ranks
    return float(precision_at_hits.mean())


@dataclass(frozen=True)
class MacroScore:
    """Promedio macro y las etiquetas omitidas por tener una sola clase."""

    value: float
    skipped: tuple[int, ...] = ()

    def __float__(self) -> float:
        return self.value


def macro_over_tags(
    metric: Metric, score_matrix: npt.ArrayLike, label_matrix: npt.ArrayLike
) -> MacroScore:
    """Media no ponderada de la métrica por etiqueta, sobre etiquetas con ambas clases."""
    scores = np.asarray(score_matrix, dtype=np.float64)
    labels = np.asarray(label_matrix)
    if scores.ndim != 2 or scores.shape != labels.shape:
        raise ValueError(f"Matrices incompatibles: {scores.shape} y {labels.shape}")
    values: list[float] = []
    skipped: list[int] = []
    for tag in range(scores.shape[1]):
        column = _as_binary(labels[:, tag])
        if column.all() or not column.any():
            skipped.append(tag)
            continue
        values.append(metric(scores[:, tag], column))
    if not values:
        raise AllTagsDegenerate(f"Las {scores.shape[1]} etiquetas tienen una sola clase")
    return MacroScore(value=float(np.mean(values)), skipped=tuple(skipped))


def _embed(model: ModelParams, waveforms: FloatArray) -> torch.Tensor:
    chunks = [
        fe_forward(model, waveforms[start : start + EVAL_BATCH_SIZE])
        for start in range(0, len(waveforms), EVAL_BATCH_SIZE)
    ]
    return torch.cat(chunks)


def _condition_metrics(
    condition: EvalCondition, scores: FloatArray, labels: FloatArray
) -> ConditionMetrics:
    n_tags = labels.shape[1]
    try:
        auc = macro_over_tags(roc_auc, scores, labels)
        ap = macro_over_tags(average_precision, scores, labels)
    except AllTagsDegenerate:
        logger.warning("Condición %s: ninguna etiqueta evaluable", condition.label)
        return ConditionMetrics(condition, None, None, len(labels), n_tags, n_tags)
    return ConditionMetrics(
        condition=condition,
        macro_auc=auc.value,
        macro_ap=ap.value,
        n_items=len(labels),
        skipped_auc=len(auc.skipped),
        skipped_ap=len(ap.skipped),
    )


def evaluate(model: ModelParams, eval_set: EvalSet, label: str = "") -> EvalReport:
    """
    Evalúa el modelo en modo inferencia: sigmoide sobre los logits del LP y un
    par (AUC, AP) macro por condición. La sonda de dominio usa todos los
    elementos limpios y, por cada pista i, el elemento ruidoso de la condición
    ruidosa i mod n; mide la precisión del DC con umbral 0.5.
    """
    modes = {module: module.training for module in model.modules()}
    model.eval()
    try:
        with torch.no_grad():
            embeddings: dict[EvalCondition, torch.Tensor] = {}
            results: list[ConditionMetrics] = []
            for condition in eval_set.conditions:
                items = eval_set.for_condition(condition)
                waveforms = np.stack([item.waveform for item in items])
                labels = np.stack([item.tags for item in items]).astype(np.float64)
                embeddings[condition] = _embed(model, waveforms)
                logits = lp_forward(model, embeddings[condition])
                scores = torch.sigmoid(logits).double().numpy()
                results.append(_condition_metrics(condition, scores, labels))
            probe = _probe_accuracy(model, eval_set, embeddings)
    finally:
        for module, training in modes.items():
            module.training = training
    return EvalReport(conditions=tuple(results), dc_probe_accuracy=probe, label=label)


def _probe_accuracy(
    model: ModelParams, eval_set: EvalSet, embeddings: dict[EvalCondition, torch.Tensor]
) -> float | None:
    clean = [c for c in eval_set.conditions if c.is_clean]
    noisy = [c for c in eval_set.conditions if not c.is_clean]
    if not clean or not noisy:
        return None
    clean_embeddings = embeddings[clean[0]]
    n_tracks = clean_embeddings.shape[0]
    picks = torch.stack(
        [embeddings[noisy[i % len(noisy)]][i] for i in range(n_tracks)]
    )
    probabilities = dc_forward(model, torch.cat([clean_embeddings, picks]))
    labels = torch.cat([torch.zeros(n_tracks), torch.ones(n_tracks)])
    predictions = (probabilities > 0.5).to(labels.dtype)
    return float((predictions == labels).double().mean())


def probe_accuracy(model: ModelParams, waveforms: np.ndarray, domain_labels: np.ndarray) -> float:
    """Precisión del DC (umbral 0.5) sobre un conjunto de sonda balanceado."""
    modes = {module: module.training for module in model.modules()}
    model.eval()
    try:
        with torch.no_grad():
            probabilities = dc_forward(model, _embed(model, waveforms)).double().numpy()
    finally:
        for module, training in modes.items():
            module.training = training
    return float(np.mean((probabilities > 0.5) == (domain_labels > 0.5)))


# Serialización del informe


def report_to_records(report: EvalReport) -> list[dict[str, Any]]:
    records: list[dict[str, Any]] = [
        {
            "kind": "condition",
            "label": report.label,
            "condition": metrics.condition.label,
            "macro_auc": metrics.macro_auc,
            "macro_ap": metrics.macro_ap,
            "n_items": metrics.n_items,
            "skipped_auc": metrics.skipped_auc,
            "skipped_ap": metrics.skipped_ap,
        }
        for metrics in report.conditions
    ]
    records.append(
        {"kind": "probe", "label": report.label, "dc_probe_accuracy": report.dc_probe_accuracy}
    )
    return records


def records_to_report(records: Sequence[dict[str, Any]]) -> EvalReport:
    conditions: list[ConditionMetrics] = []
    probe: float | None = None
    label = ""
    for record in records:
        label = str(record.get("label", label))
        if record.get("kind") == "probe":
            probe = record.get("dc_probe_accuracy")
            continue
        conditions.append(
            ConditionMetrics(
                condition=EvalCondition.parse(record["condition"]),
                macro_auc=record.get("macro_auc"),
                macro_ap=record.get("macro_ap"),
                n_items=int(record.get("n_items", 0)),
                skipped_auc=int(record.get("skipped_auc", 0)),
                skipped_ap=int(record.get("skipped_ap", 0)),
            )
        )
    return EvalReport(conditions=tuple(conditions), dc_probe_accuracy=probe, label=label)


def read_report(path: Path) -> EvalReport:
    records: list[dict[str, Any]] = []
    with path.open(encoding="utf-8") as file:
        for number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc}", line=number) from exc
    return records_to_report(records)


def _cell(value: float | None) -> str:
    return f"{value:.4f}" if value is not None else "-"


def format_table(reports: Sequence[EvalReport]) -> str:
    """
    Tabla alineada: configuraciones en filas y condiciones en columnas, con
    un bloque para AUC y otro para AP, más la precisión de la sonda.
    """
    if not reports:
        return ""
    conditions = [metrics.condition for metrics in reports[0].conditions]
    header = ["setting", *(c.label for c in conditions)]
    blocks: list[str] = []
    for title, attribute in (("AUC", "macro_auc"), ("AP", "macro_ap")):
        rows = [header]
        for report in reports:
            cells = [_cell(getattr(report.metrics_for(c), attribute)) for c in conditions]
            rows.append([report.label or "-", *cells])
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        lines = [
            "  ".join(
                cell.rjust(width) if i else cell.ljust(width)
                for i, (cell, width) in enumerate(zip(row, widths, strict=True))
            )
            for row in rows
        ]
        blocks.append(f"[{title}]\n" + "\n".join(lines))
    probe_width = max(len(report.label or "-") for report in reports)
    probe_lines = [
        f"{(report.label or '-').ljust(probe_width)}  {_cell(report.dc_probe_accuracy)}"
        for report in reports
    ]
    blocks.append("[DC probe accuracy]\n" + "\n".join(probe_lines))
    return "\n\n".join(blocks) + "\n"


def write_report(report: EvalReport, directory: Path) -> tuple[Path, Path]:
    """Escribe report.jsonl y report.txt en `directory`."""
    directory.mkdir(parents=True, exist_ok=True)
    jsonl_path = directory / "report.jsonl"
    text_path = directory / "report.txt"
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in report_to_records(report))
    jsonl_path.write_text(lines, encoding="utf-8")
    text_path.write_text(format_table([report]), encoding="utf-8")
    return jsonl_path, text_path
