"""Pruebas de manifiestos, muestreadores, conjuntos de evaluación y corpus sintético."""

import hashlib
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from tagshield_core.corpus import (
    CachedClipStore,
    DeskCorpus,
    Prefetcher,
    SamplingOptions,
    Stage1Sampler,
    Stage23Sampler,
    build_desk_records,
    build_domain_probe_set,
    build_eval_set,
    generate_desk_corpus,
    load_manifest,
    load_noise_manifest,
    read_manifest,
    sample_stage1_batch,
    sample_stage23_batch,
    tags_for_spec,
    write_manifest,
)
from tagshield_core.corpus.synthetic import TAG_NAMES
from tagshield_core.errors import (
    BadSpec,
    ConfigError,
    EmptyPool,
    InvariantViolation,
    MissingTags,
    OverlapViolation,
    ParseError,
)
from tagshield_core.mappers import validate_tags
from tagshield_core.signal_forge import fit_length, save_wav
from tagshield_core.types import (
    DEFAULT_CONDITIONS,
    Domain,
    EvalCondition,
    ExperimentSetting,
    ManifestKind,
    SettingName,
    Split,
    SynthConfig,
    SynthKind,
    SynthSpec,
    TrackRecord,
)

from .conftest import SAMPLE_RATE_HZ, random_clip

LENGTH = 243


def _options(**overrides) -> SamplingOptions:
    return replace(SamplingOptions(input_length=LENGTH, n_tags=8), **overrides)


def _setting(name: SettingName) -> ExperimentSetting:
    return ExperimentSetting.named(name, extra_unlabeled_pool=Path("extra.jsonl"))


def _train(corpus: DeskCorpus) -> list[TrackRecord]:
    return corpus.split(Split.train)


def _noises(corpus: DeskCorpus, split: Split = Split.train):
    return [noise for noise in corpus.noises if noise.split is split]


def _write_lines(path: Path, lines: list[dict]) -> Path:
    path.write_text("\n".join(json.dumps(line) for line in lines) + "\n", encoding="utf-8")
    return path


HEADER = {"schema": "tagshield-manifest", "version": 1, "kind": "tracks", "n_tags": 50}


class TestManifest:
    def test_round_trip(self, tmp_path: Path):
        audio = (tmp_path / "audio" / "a.wav").resolve()
        spec = SynthSpec(SynthKind.music, seed=3, duration_s=0.5, params={"envelope": "pulse"})
        records = [
            TrackRecord("a", audio, Domain.source, Split.train, tags=(1, 0, 1)),
            TrackRecord("b", spec, Domain.target, Split.train, noise_refs=("n1", "n2")),
            TrackRecord("c", spec, Domain.source, Split.test, tags=(0, 0, 1)),
        ]
        path = tmp_path / "tracks.jsonl"
        write_manifest(path, records, ManifestKind.tracks, 3)
        assert load_manifest(path, 3) == records
        assert '"path": "audio/a.wav"' in path.read_text(encoding="utf-8")

    def test_header_only_manifest_is_empty(self, tmp_path: Path):
        path = _write_lines(tmp_path / "m.jsonl", [HEADER])
        assert load_manifest(path) == []

    def test_wrong_tag_dimension(self, tmp_path: Path):
        record = {
            "id": "x",
            "source": {"path": "x.wav"},
            "domain": "source",
            "split": "train",
            "tags": [0] * 49,
        }
        path = _write_lines(tmp_path / "m.jsonl", [HEADER, record])
        with pytest.raises(InvariantViolation) as info:
            load_manifest(path)
        assert info.value.record_id == "x"

    @pytest.mark.parametrize("tags", [[True, False, True], [1, 0.0, 1], [1, 2, 0], [1, "1", 0]])
    def test_tags_must_be_integer_bits(self, tags):
        with pytest.raises(InvariantViolation):
            validate_tags(tags, 3, "x")
        assert validate_tags([1, 0, 1], 3, "x") == (1, 0, 1)

    def test_parse_error_carries_line(self, tmp_path: Path):
        record = {"id": "x", "source": {"path": "x.wav"}, "domain": "source", "split": "train"}
        path = tmp_path / "m.jsonl"
        path.write_text(
            json.dumps(HEADER) + "\n" + json.dumps(record) + "\n{roto\n", encoding="utf-8"
        )
        with pytest.raises(ParseError) as info:
            read_manifest(path)
        assert info.value.line == 3

    def test_bad_header(self, tmp_path: Path):
        path = _write_lines(tmp_path / "m.jsonl", [{"schema": "otro", "version": 1}])
        with pytest.raises(ParseError):
            read_manifest(path)

    def test_duplicate_ids_and_noisy_source(self, tmp_path: Path):
        record = {"id": "x", "source": {"path": "x.wav"}, "domain": "source", "split": "train"}
        path = _write_lines(tmp_path / "dup.jsonl", [HEADER, record, record])
        with pytest.raises(InvariantViolation):
            read_manifest(path)
        noisy = dict(record, noise_refs=["n1"])
        path = _write_lines(tmp_path / "noisy.jsonl", [HEADER, noisy])
        with pytest.raises(InvariantViolation):
            read_manifest(path)

    def test_kind_and_tag_count_checks(self, desk_corpus: DeskCorpus):
        manifests = desk_corpus.manifests
        with pytest.raises(ConfigError):
            load_manifest(manifests.train, n_tags=50)
        with pytest.raises(ConfigError):
            load_manifest(manifests.noise_train)
        with pytest.raises(ConfigError):
            load_noise_manifest(manifests.train)


class TestClipStore:
    def test_synth_sources_are_cached(self, desk_corpus: DeskCorpus, store: CachedClipStore):
        record = desk_corpus.tracks[0]
        assert store.load_track(record) is store.load_track(record)
        store.clear()
        assert store.load_track(record) == store.load_track(record)

    def test_file_sources_and_eviction(self, rng, tmp_path: Path):
        paths = []
        for index in range(2):
            path = tmp_path / f"n{index}.wav"
            save_wav(random_clip(rng, 500), path)
            paths.append(path)
        store = CachedClipStore(SAMPLE_RATE_HZ, max_items=1)
        records = [
            TrackRecord(f"t{i}", path, Domain.source, Split.train, tags=(1,))
            for i, path in enumerate(paths)
        ]
        first = store.load_track(records[0])
        store.load_track(records[1])
        assert len(first) == 500
        assert store.load_track(records[0]) is not first


class TestStage1Sampler:
    def test_aligned_pairs(self, desk_corpus, store, rng):
        batch = sample_stage1_batch(
            store, _train(desk_corpus), _noises(desk_corpus), 4, rng, _options()
        )
        assert batch.views_a.shape == batch.views_b.shape == (4, LENGTH)
        assert batch.views_a.dtype == np.float32
        assert len(batch) == 4
        assert len(set(batch.track_ids)) == 4

    def test_replay_is_identical(self, desk_corpus, store):
        args = (store, _train(desk_corpus), _noises(desk_corpus), 4)
        first = sample_stage1_batch(*args, np.random.default_rng(5), _options())
        second = sample_stage1_batch(*args, np.random.default_rng(5), _options())
        np.testing.assert_array_equal(first.views_a, second.views_a)
        np.testing.assert_array_equal(first.views_b, second.views_b)
        assert first.track_ids == second.track_ids

    def test_noise_probability_extremes(self, desk_corpus, store, rng):
        records, noises = _train(desk_corpus), _noises(desk_corpus)
        clean = Stage1Sampler(
            store, records, noises, _options(noisy_view_probability=0.0, gain_jitter_db=0.0)
        ).sample(4, rng)
        assert not clean.noisy_a.any() and not clean.noisy_b.any()
        levels = np.sqrt(np.mean(clean.views_a.astype(np.float64) ** 2, axis=1))
        np.testing.assert_allclose(levels, 0.1, rtol=1e-5)
        noisy = Stage1Sampler(store, records, noises, _options(noisy_view_probability=1.0))
        batch = noisy.sample(4, rng)
        assert batch.noisy_a.all() and batch.noisy_b.all()

    def test_noisy_view_fraction(self, desk_corpus, store):
        sampler = Stage1Sampler(store, _train(desk_corpus), _noises(desk_corpus), _options())
        rng = np.random.default_rng(11)
        flags = []
        for _ in range(125):
            batch = sampler.sample(8, rng)
            flags.extend(batch.noisy_a.tolist() + batch.noisy_b.tolist())
        assert len(flags) == 2000
        assert 0.45 <= np.mean(flags) <= 0.55

    def test_epoch_covers_every_track(self, desk_corpus, store, rng):
        records = _train(desk_corpus)
        sampler = Stage1Sampler(store, records, _noises(desk_corpus), _options())
        seen = [track for batch in sampler.epoch(8, rng) for track in batch.track_ids]
        assert sorted(seen) == sorted(record.id for record in records)

    @pytest.mark.parametrize("n_records, expected", [(8, 2), (9, 2), (10, 3), (11, 3), (1, 0)])
    def test_batches_per_epoch_matches_epoch(self, desk_corpus, store, n_records, expected):
        records = _train(desk_corpus)[:n_records]
        sampler = Stage1Sampler(store, records, _noises(desk_corpus), _options())
        batches = list(sampler.epoch(4, np.random.default_rng(2)))
        assert sampler.batches_per_epoch(4) == len(batches) == expected

    def test_empty_pool(self, store):
        with pytest.raises(EmptyPool):
            Stage1Sampler(store, [], [], _options())


class TestStage23Sampler:
    def test_baseline_has_empty_target_half(self, desk_corpus, store, rng):
        batch = sample_stage23_batch(
            store,
            _train(desk_corpus),
            _setting(SettingName.baseline),
            _noises(desk_corpus),
            4,
            rng,
            _options(),
        )
        assert batch.trg_waveforms.shape == (0, LENGTH)
        assert batch.trg_ids == ()
        assert batch.src_waveforms.shape == (4, LENGTH)

    def test_proposed_a_halves_are_disjoint(self, desk_corpus, store, rng):
        batch = sample_stage23_batch(
            store,
            _train(desk_corpus),
            _setting(SettingName.proposed_a),
            _noises(desk_corpus),
            8,
            rng,
            _options(),
        )
        assert len(batch.src_ids) == len(batch.trg_ids) == 8
        assert not set(batch.src_ids) & set(batch.trg_ids)
        assert batch.trg_tags is None
        assert batch.src_tags.shape == (8, 8)
        np.testing.assert_array_equal(batch.src_domain_labels, np.zeros(8))
        np.testing.assert_array_equal(batch.trg_domain_labels, np.ones(8))

    def test_proposed_b_draws_from_both_pools(self, desk_corpus, store, rng):
        sampler = Stage23Sampler(
            store,
            _train(desk_corpus),
            _setting(SettingName.proposed_b),
            _noises(desk_corpus),
            _options(),
            desk_corpus.extra,
        )
        ids = [i for _ in range(20) for i in sampler.sample(8, rng).trg_ids]
        assert any(i.startswith("xtr-") for i in ids)
        assert any(i.startswith("trk-") for i in ids)

    def test_oracle_target_half_is_tagged(self, desk_corpus, store, rng):
        records = [r for r in desk_corpus.oracle_tracks if r.split is Split.train]
        sampler = Stage23Sampler(
            store, records, _setting(SettingName.oracle), _noises(desk_corpus), _options()
        )
        batch = sampler.sample(4, rng)
        assert batch.trg_tags is not None and batch.trg_tags.shape == (4, 8)

    def test_setting_record_checks(self, desk_corpus, store):
        oracle_records = [r for r in desk_corpus.oracle_tracks if r.split is Split.train]
        with pytest.raises(InvariantViolation):
            Stage23Sampler(
                store, oracle_records, _setting(SettingName.proposed_a), [], _options()
            )
        with pytest.raises(MissingTags):
            Stage23Sampler(
                store, _train(desk_corpus), _setting(SettingName.oracle), [], _options()
            )

    def test_empty_and_overlapping_pools(self, desk_corpus, store):
        spec = desk_corpus.tracks[0].source
        target_only = [TrackRecord("t", spec, Domain.target, Split.train)]
        with pytest.raises(EmptyPool):
            Stage23Sampler(store, target_only, _setting(SettingName.proposed_a), [], _options())
        overlap = [
            TrackRecord("same", spec, Domain.source, Split.train, tags=(1,) * 8),
            TrackRecord("same", spec, Domain.target, Split.train),
        ]
        with pytest.raises(OverlapViolation):
            Stage23Sampler(store, overlap, _setting(SettingName.proposed_a), [], _options())

    def test_epoch_batches_and_replay(self, desk_corpus, store):
        sampler = Stage23Sampler(
            store,
            _train(desk_corpus),
            _setting(SettingName.proposed_a),
            _noises(desk_corpus),
            _options(),
        )
        assert sampler.batches_per_epoch(4) == len(sampler.source_pool) // 4

        def run() -> list:
            return list(sampler.epoch(4, np.random.default_rng(1), np.random.default_rng(2)))

        first, second = run(), run()
        assert len(first) == sampler.batches_per_epoch(4)
        for a, b in zip(first, second, strict=True):
            np.testing.assert_array_equal(a.src_waveforms, b.src_waveforms)
            np.testing.assert_array_equal(a.trg_waveforms, b.trg_waveforms)

    def test_missing_noise_pool(self, desk_corpus, store, rng):
        sampler = Stage23Sampler(
            store, _train(desk_corpus), _setting(SettingName.proposed_a), [], _options()
        )
        with pytest.raises(EmptyPool):
            sampler.sample(4, rng)


class TestEvalSet:
    def _records(self, corpus: DeskCorpus) -> list[TrackRecord]:
        return list(corpus.oracle_tracks[:10])

    def test_items_per_condition(self, desk_corpus, store):
        eval_set = build_eval_set(
            store, self._records(desk_corpus), _noises(desk_corpus, Split.test),
            DEFAULT_CONDITIONS, 7, LENGTH,
        )
        assert len(eval_set) == 50
        assert all(len(eval_set.for_condition(c)) == 10 for c in DEFAULT_CONDITIONS)

    def test_clean_items_are_unmixed_crops(self, desk_corpus, store):
        records = self._records(desk_corpus)
        eval_set = build_eval_set(
            store, records, _noises(desk_corpus, Split.test), DEFAULT_CONDITIONS, 7, LENGTH
        )
        for i, item in enumerate(eval_set.for_condition(EvalCondition())):
            clip = store.load_track(records[i])
            expected = fit_length(clip, LENGTH, rng=np.random.default_rng([7, i]))
            np.testing.assert_array_equal(item.waveform, expected.samples)

    def test_noisy_items_have_condition_snr(self, desk_corpus, store):
        records = self._records(desk_corpus)
        eval_set = build_eval_set(
            store, records, _noises(desk_corpus, Split.test), DEFAULT_CONDITIONS, 7, LENGTH
        )
        clean = eval_set.for_condition(EvalCondition())
        for condition in DEFAULT_CONDITIONS[1:]:
            for music, item in zip(clean, eval_set.for_condition(condition), strict=True):
                noise = item.waveform - music.waveform
                snr = 20 * np.log10(np.sqrt(np.mean(music.waveform**2)) / np.sqrt(np.mean(noise**2)))
                assert snr == pytest.approx(condition.snr_db, abs=0.05)

    def test_seed_determinism(self, desk_corpus, store):
        args = (store, self._records(desk_corpus), _noises(desk_corpus, Split.test), DEFAULT_CONDITIONS)
        first, second = build_eval_set(*args, 7, LENGTH), build_eval_set(*args, 7, LENGTH)
        other = build_eval_set(*args, 8, LENGTH)
        for a, b in zip(first.items, second.items, strict=True):
            np.testing.assert_array_equal(a.waveform, b.waveform)
        assert any(
            not np.array_equal(a.waveform, b.waveform)
            for a, b in zip(first.items, other.items, strict=True)
        )

    def test_requires_tags_and_records(self, desk_corpus, store):
        untagged = [r for r in desk_corpus.tracks if r.tags is None][:2]
        with pytest.raises(MissingTags):
            build_eval_set(store, untagged, [], DEFAULT_CONDITIONS, 0, LENGTH)
        with pytest.raises(EmptyPool):
            build_eval_set(store, [], [], DEFAULT_CONDITIONS, 0, LENGTH)

    def test_unknown_noise_refs(self, desk_corpus, store):
        record = replace(desk_corpus.oracle_tracks[0], noise_refs=("nse-99999",))
        with pytest.raises(InvariantViolation):
            build_eval_set(
                store, [record], _noises(desk_corpus, Split.test), DEFAULT_CONDITIONS, 0, LENGTH
            )

    def test_domain_probe_set_is_balanced(self, desk_corpus, store):
        records = desk_corpus.split(Split.valid)
        probe = build_domain_probe_set(
            store, records, _noises(desk_corpus, Split.valid), 3, LENGTH
        )
        assert probe.waveforms.shape == (2 * len(records), LENGTH)
        np.testing.assert_array_equal(probe.domain_labels[0::2], 0.0)
        np.testing.assert_array_equal(probe.domain_labels[1::2], 1.0)
        levels = np.sqrt(np.mean(probe.waveforms[0::2].astype(np.float64) ** 2, axis=1))
        np.testing.assert_allclose(levels, 0.1, rtol=1e-5)


class TestDeskCorpus:
    def test_splits_and_domains(self, desk_corpus: DeskCorpus):
        assert len(desk_corpus.tracks) == 40
        assert len(desk_corpus.split(Split.test)) == 8
        assert len(desk_corpus.split(Split.valid)) == 6
        train = desk_corpus.split(Split.train)
        target = [r for r in train if r.domain is Domain.target]
        assert len(target) == 13
        assert all(r.tags is None for r in target)
        assert all(r.tags is not None for r in train if r.domain is Domain.source)
        assert all(r.tags is not None for r in desk_corpus.oracle_tracks)
        assert all(r.domain is Domain.target and r.tags is None for r in desk_corpus.extra)

    def test_tags_follow_synthesis_parameters(self, desk_corpus: DeskCorpus):
        for record in desk_corpus.oracle_tracks:
            assert record.tags == tags_for_spec(record.source)
        spec = SynthSpec(
            SynthKind.music,
            seed=0,
            duration_s=0.1,
            params={"fundamental_hz": 220.0, "n_harmonics": 3, "envelope": "swell"},
        )
        tags = dict(zip(TAG_NAMES, tags_for_spec(spec), strict=True))
        assert tags["f0_mid"] == 1 and tags["harmonics_sparse"] == 1
        assert tags["envelope_swell"] == 1 and sum(tags.values()) == 3

    def test_untaggable_spec(self):
        spec = SynthSpec(SynthKind.music, seed=0, duration_s=0.1, params={"fundamental_hz": 160.0})
        with pytest.raises(BadSpec):
            tags_for_spec(spec)

    def test_test_noises_are_bursts(self, desk_corpus: DeskCorpus):
        for noise in desk_corpus.noises:
            assert bool(noise.source.params.get("burst", False)) == (noise.split is Split.test)

    def test_manifests_match_records(self, desk_corpus: DeskCorpus):
        manifests = desk_corpus.manifests
        total = sum(
            len(load_manifest(path, 8))
            for path in (manifests.train, manifests.valid, manifests.test)
        )
        assert total == 40
        assert load_manifest(manifests.test, 8) == desk_corpus.split(Split.test)
        assert len(load_manifest(manifests.extra, 8)) == 4
        assert len(load_noise_manifest(manifests.noise_test)) == 2

    def test_default_extra_pool_is_much_smaller_than_target(self, tmp_path: Path):
        corpus = build_desk_records(SynthConfig(write_audio=False, output_dir=tmp_path), seed=0)
        target = [r for r in corpus.split(Split.train) if r.domain is Domain.target]
        assert len(target) == 65 and len(corpus.extra) == 4
        assert 15 <= len(target) / len(corpus.extra) <= 19

    def test_hundred_tracks(self, tmp_path: Path):
        config = SynthConfig(n_tracks=100, n_noises=3, write_audio=False, output_dir=tmp_path)
        corpus = build_desk_records(config, seed=0)
        assert len(corpus.tracks) == 100

    def test_audio_is_reproducible(self, tmp_path: Path):
        def generate(name: str) -> dict[str, str]:
            config = SynthConfig(
                n_tracks=10,
                n_extra=1,
                n_noises=3,
                track_duration_s=0.05,
                noise_duration_s=0.05,
                output_dir=tmp_path / name,
            )
            generate_desk_corpus(config, seed=4)
            return {
                path.relative_to(tmp_path / name).as_posix(): hashlib.sha256(
                    path.read_bytes()
                ).hexdigest()
                for path in sorted((tmp_path / name).rglob("*"))
                if path.is_file()
            }

        first, second = generate("a"), generate("b")
        assert first == second
        assert "audio/trk-00000.wav" in first

    def test_invalid_sizes(self, tmp_path: Path):
        with pytest.raises(ConfigError):
            build_desk_records(SynthConfig(n_tracks=4, valid_fraction=0.0, output_dir=tmp_path), 0)
        with pytest.raises(ConfigError):
            build_desk_records(SynthConfig(n_noises=2, output_dir=tmp_path), 0)


class TestPrefetcher:
    def test_preserves_order(self):
        with Prefetcher(iter(range(50)), depth=3) as items:
            assert list(items) == list(range(50))

    def test_synchronous_mode(self):
        assert list(Prefetcher(range(5), depth=0)) == [0, 1, 2, 3, 4]

    def test_producer_errors_reach_consumer(self):
        def failing():
            yield 1
            raise EmptyPool("sin lotes")

        with pytest.raises(EmptyPool), Prefetcher(failing(), depth=2) as items:
            list(items)

    def test_early_close(self):
        with Prefetcher(iter(range(10_000)), depth=2) as items:
            for item in items:
                if item == 3:
                    break
