"""Pruebas de las métricas de ranking y del informe de evaluación."""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from tagshield_core.corpus import build_eval_set
from tagshield_core.errors import AllTagsDegenerate, DegenerateLabels, ParseError
from tagshield_core.evalkit import (
    average_precision,
    evaluate,
    format_table,
    macro_over_tags,
    read_report,
    roc_auc,
    write_report,
)
from tagshield_core.netlab import build_model, param_checksum
from tagshield_core.types import (
    DEFAULT_CONDITIONS,
    ConditionMetrics,
    EvalCondition,
    EvalReport,
    Split,
)

from .conftest import TINY_ENCODER


def _pairwise_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    positives = scores[labels == 1]
    negatives = scores[labels == 0]
    credit = 0.0
    for p in positives:
        for n in negatives:
            credit += 1.0 if p > n else 0.5 if p == n else 0.0
    return credit / (len(positives) * len(negatives))


def _rank_walk_ap(scores: np.ndarray, labels: np.ndarray) -> float:
    order = sorted(range(len(scores)), key=lambda k: -scores[k])
    hits, precisions = 0, []
    for rank, k in enumerate(order, start=1):
        if labels[k] == 1:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


def _random_instance(rng: np.random.Generator, ties: bool) -> tuple[np.ndarray, np.ndarray]:
    n = int(rng.integers(2, 201))
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    scores = rng.random(n)
    if ties:
        scores = np.round(scores, 1)
    return scores, labels


class TestRocAuc:
    def test_pairwise_example(self):
        assert roc_auc([0.9, 0.8, 0.3, 0.2], [1, 0, 1, 0]) == pytest.approx(0.75)

    def test_perfect_and_tied(self):
        assert roc_auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
        assert roc_auc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    @pytest.mark.parametrize("ties", [False, True])
    def test_matches_pairwise_enumeration(self, ties, rng):
        for _ in range(50):
            scores, labels = _random_instance(rng, ties)
            assert abs(roc_auc(scores, labels) - _pairwise_auc(scores, labels)) < 1e-12

    def test_monotone_transform_invariance(self, rng):
        for _ in range(20):
            scores, labels = _random_instance(rng, ties=False)
            transformed = np.exp(3.0 * scores) + 1.0
            assert roc_auc(transformed, labels) == roc_auc(scores, labels)

    def test_negated_scores_complement(self, rng):
        for _ in range(20):
            scores, labels = _random_instance(rng, ties=False)
            assert roc_auc(scores, labels) + roc_auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)

    def test_chance_level_for_unrelated_scores(self, rng):
        labels = rng.integers(0, 2, size=4000)
        assert 0.45 <= roc_auc(rng.random(4000), labels) <= 0.55

    def test_single_class(self):
        with pytest.raises(DegenerateLabels):
            roc_auc([0.1, 0.2], [1, 1])
        with pytest.raises(DegenerateLabels):
            roc_auc([0.1, 0.2], [0, 2])


class TestAveragePrecision:
    def test_rank_example(self):
        assert average_precision([0.9, 0.8, 0.7], [1, 0, 1]) == pytest.approx(5 / 6)

    def test_trivial_cases(self):
        assert average_precision([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
        assert average_precision([0.3], [1]) == 1.0

    def test_ties_follow_input_order(self):
        assert average_precision([0.5, 0.5], [0, 1]) == pytest.approx(0.5)
        assert average_precision([0.5, 0.5], [1, 0]) == 1.0

    @pytest.mark.parametrize("ties", [False, True])
    def test_matches_rank_walk(self, ties, rng):
        for _ in range(50):
            scores, labels = _random_instance(rng, ties)
            assert abs(average_precision(scores, labels) - _rank_walk_ap(scores, labels)) < 1e-12

    def test_no_positives(self):
        with pytest.raises(DegenerateLabels):
            average_precision([0.1, 0.2], [0, 0])


class TestMacroOverTags:
    def test_mean_of_tags(self):
        scores = np.array([[0.9, 0.5], [0.1, 0.5], [0.8, 0.5], [0.2, 0.5]])
        labels = np.array([[1, 1], [0, 0], [1, 0], [0, 1]])
        result = macro_over_tags(roc_auc, scores, labels)
        assert result.value == pytest.approx(0.75)
        assert result.skipped == ()

    def test_single_class_tags_are_skipped(self):
        scores = np.array([[0.9, 0.2], [0.1, 0.4], [0.5, 0.3]])
        labels = np.array([[1, 0], [0, 0], [1, 0]])
        result = macro_over_tags(average_precision, scores, labels)
        assert result.skipped == (1,)
        assert float(result) == pytest.approx(1.0)

    def test_equals_per_tag_recomputation(self, rng):
        scores = rng.random((60, 5))
        labels = rng.integers(0, 2, size=(60, 5))
        expected = np.mean([roc_auc(scores[:, t], labels[:, t]) for t in range(5)])
        assert macro_over_tags(roc_auc, scores, labels).value == pytest.approx(expected, abs=1e-12)

    def test_all_tags_degenerate(self):
        with pytest.raises(AllTagsDegenerate):
            macro_over_tags(roc_auc, np.zeros((3, 2)), np.ones((3, 2)))


@pytest.fixture
def eval_set(desk_corpus, store):
    noises = [noise for noise in desk_corpus.noises if noise.split is Split.test]
    return build_eval_set(
        store,
        desk_corpus.oracle_tracks[:10],
        noises,
        DEFAULT_CONDITIONS,
        rng_seed=3,
        input_length=TINY_ENCODER.input_length,
    )


class TestEvaluate:
    def test_report_structure(self, eval_set):
        model = build_model(TINY_ENCODER, 8, seed=0)
        report = evaluate(model, eval_set, label="baseline")
        assert [m.condition for m in report.conditions] == list(DEFAULT_CONDITIONS)
        assert report.label == "baseline"
        for metrics in report.conditions:
            assert metrics.n_items == 10
            if metrics.macro_auc is not None:
                assert 0.0 <= metrics.macro_auc <= 1.0
                assert 0.0 <= metrics.macro_ap <= 1.0
        assert report.dc_probe_accuracy is not None
        assert 0.0 <= report.dc_probe_accuracy <= 1.0

    def test_random_model_scores_at_chance(self, desk_corpus, store):
        tracks = desk_corpus.oracle_tracks
        rng = np.random.default_rng(21)
        half = np.repeat([0, 1], len(tracks) // 2)
        columns = np.stack([rng.permutation(half) for _ in range(8)], axis=1)
        balanced = [
            replace(track, tags=tuple(int(tag) for tag in row))
            for track, row in zip(tracks, columns)
        ]
        noises = [noise for noise in desk_corpus.noises if noise.split is Split.test]
        balanced_set = build_eval_set(
            store, balanced, noises, DEFAULT_CONDITIONS, 3, TINY_ENCODER.input_length
        )
        report = evaluate(build_model(TINY_ENCODER, 8, seed=5), balanced_set)
        for metrics in report.conditions:
            assert metrics.skipped_auc == 0
            assert 0.35 <= metrics.macro_auc <= 0.65

    def test_deterministic_and_side_effect_free(self, eval_set):
        model = build_model(TINY_ENCODER, 8, seed=0)
        checksum = param_checksum(model)
        first = evaluate(model, eval_set)
        second = evaluate(model, eval_set)
        assert first == second
        assert param_checksum(model) == checksum
        assert model.fe.training

    def test_probe_needs_both_domains(self, desk_corpus, store):
        clean_only = build_eval_set(
            store, desk_corpus.oracle_tracks[:4], [], (EvalCondition(),), 3, TINY_ENCODER.input_length
        )
        report = evaluate(build_model(TINY_ENCODER, 8, seed=0), clean_only)
        assert report.dc_probe_accuracy is None


def _sample_report(label: str, auc: float) -> EvalReport:
    return EvalReport(
        conditions=(
            ConditionMetrics(EvalCondition(), auc, 0.5, 10),
            ConditionMetrics(EvalCondition(-5.0), auc - 0.1, 0.4, 10, skipped_auc=1),
            ConditionMetrics(EvalCondition(0.0), None, None, 10, 8, 8),
        ),
        dc_probe_accuracy=0.625,
        label=label,
    )


class TestReportFiles:
    def test_jsonl_round_trip(self, tmp_path: Path):
        report = _sample_report("proposed_a", 0.8125)
        jsonl_path, text_path = write_report(report, tmp_path / "eval")
        assert read_report(jsonl_path) == report
        assert text_path.read_text(encoding="utf-8") == format_table([report])

    def test_table_layout(self):
        table = format_table([_sample_report("baseline", 0.75), _sample_report("proposed_a", 0.8)])
        assert table.startswith("[AUC]\n")
        assert "[AP]" in table and "[DC probe accuracy]" in table
        header = table.splitlines()[1].split()
        assert header == ["setting", "clean", "-5dB", "0dB"]
        baseline_row = table.splitlines()[2].split()
        assert baseline_row == ["baseline", "0.7500", "0.6500", "-"]

    def test_empty_table(self):
        assert format_table([]) == ""

    def test_malformed_line(self, tmp_path: Path):
        path = tmp_path / "report.jsonl"
        path.write_text('{"kind": "probe", "dc_probe_accuracy": 0.5}\n{oops\n', encoding="utf-8")
        with pytest.raises(ParseError) as excinfo:
            read_report(path)
        assert excinfo.value.line == 2
