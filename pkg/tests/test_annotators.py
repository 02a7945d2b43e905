from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pytest

from voxpipe.annotators import (
    AnnotationBatchResult,
    AnnotatorError,
    AnnotatorRegistry,
    AnnotatorSpec,
    AudioAccess,
    PipelineConfig,
    SegmentInput,
    SubprocessAnnotator,
    build_stub_registry,
    discover_sources,
    run_annotator,
    run_pipeline,
    sound_event_taxonomy,
)
from voxpipe.annotators.stubs import StubSoundEvents
from voxpipe.fixtures import span_for_segment
from voxpipe.manifest import manifest_to_text
from voxpipe.snr import build_snr_table


@pytest.fixture(scope="module")
def small_table():
    return build_snr_table(trials_per_point=6, samples_per_trial=4000, seed=5)


@pytest.fixture()
def demo_sources(demo_dir):
    sources, skipped = discover_sources(demo_dir)
    assert not skipped
    return sources


def make_config(tmp_path, **overrides) -> PipelineConfig:
    config = PipelineConfig(output_manifest=str(tmp_path / "m.jsonl"), seed=7)
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


@dataclass
class ExplodingAnnotator:
    explode_on: frozenset[str]

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        if any(item.segment_id in self.explode_on for item in batch):
            raise RuntimeError("synthetic adapter crash")
        result = AnnotationBatchResult()
        for item in batch:
            result.fields[item.segment_id] = {"emotion_category": "neutral"}
        return result


class TestRegistry:
    def test_duplicate_name_rejected(self, small_table):
        registry = build_stub_registry(small_table)
        with pytest.raises(AnnotatorError, match="already registered"):
            registry.register(
                AnnotatorSpec("snr", "v2", ("snr_db",)), object()
            )

    def test_output_field_collision_rejected(self, small_table):
        registry = AnnotatorRegistry()
        spec_a = AnnotatorSpec("snr", "a", ("snr_db",))
        spec_b = AnnotatorSpec("emotion_category", "b", ("snr_db",))

        class Fake:
            def annotate_batch(self, batch):
                return AnnotationBatchResult()

        registry.register(spec_a, Fake())
        with pytest.raises(AnnotatorError, match="snr_db"):
            registry.register(spec_b, Fake())

    def test_unknown_annotator_name_rejected(self):
        with pytest.raises(AnnotatorError, match="unknown annotator name"):
            AnnotatorSpec("vibes", "v1", ("snr_db",))

    def test_non_annotation_output_field_rejected(self):
        with pytest.raises(AnnotatorError, match="not an annotation field"):
            AnnotatorSpec("snr", "v1", ("segment_id",))

    def test_taxonomy_has_over_500_labels(self):
        labels = sound_event_taxonomy()
        assert len(labels) > 500
        assert len(set(labels)) == len(labels)
        assert "Music" in labels


class TestRunAnnotator:
    def test_stub_sound_events_schema(self, demo_sources, small_table, tmp_path):
        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        manifest, _ = run_pipeline(demo_sources, config, registry)
        for record in manifest.records:
            assert record.sound_events, record.segment_id
            for label, score in record.sound_events:
                assert label in sound_event_taxonomy()
                assert 0.0 <= score <= 1.0

    def test_already_done_segments_untouched(self, demo_sources, small_table, tmp_path):
        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        manifest, _ = run_pipeline(demo_sources, config, registry)
        before = manifest_to_text(manifest)
        audio = AudioAccess(manifest.sources, config.segmenter)
        stats = run_annotator("emotion_category", manifest, audio, registry)
        assert stats.done == 0
        assert stats.skipped == len(manifest.records)
        assert manifest_to_text(manifest) == before

    def test_batch_failure_isolated(self, demo_sources, small_table, tmp_path):
        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        manifest, _ = run_pipeline(demo_sources, config, registry)
        n = len(manifest.records)
        assert n == 10

        registry2 = AnnotatorRegistry()
        explode_ids = frozenset(r.segment_id for r in manifest.records[3:6])
        registry2.register(
            AnnotatorSpec("emotion_category", "exploding-1", ("emotion_category",), batch_size=3),
            ExplodingAnnotator(explode_ids),
        )
        for record in manifest.records:
            record.annotation_status["emotion_category"] = "pending"
            record.emotion_category = None
        audio = AudioAccess(manifest.sources, config.segmenter)
        stats = run_annotator("emotion_category", manifest, audio, registry2)
        assert stats.done == 7
        assert stats.failed == 3
        failed = [r for r in manifest.records
                  if r.annotation_status["emotion_category"] == "failed"]
        assert {r.segment_id for r in failed} == explode_ids
        for record in failed:
            assert record.emotion_category is None
        assert "synthetic adapter crash" in next(iter(stats.failure_reasons.values()))

    def test_failed_segments_retried_on_next_run(self, demo_sources, small_table, tmp_path):
        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        manifest, _ = run_pipeline(demo_sources, config, registry)
        target = manifest.records[0].segment_id
        manifest.record_by_id()[target].annotation_status["emotion_category"] = "failed"
        audio = AudioAccess(manifest.sources, config.segmenter)
        stats = run_annotator("emotion_category", manifest, audio, registry)
        assert stats.done == 1
        assert manifest.record_by_id()[target].annotation_status["emotion_category"] == "done"

    def test_undeclared_output_field_fails_batch(self, demo_sources, small_table, tmp_path):
        @dataclass
        class Greedy:
            def annotate_batch(self, batch):
                result = AnnotationBatchResult()
                for item in batch:
                    result.fields[item.segment_id] = {"snr_db": 1.0}
                return result

        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        manifest, _ = run_pipeline(demo_sources, config, registry)
        registry2 = AnnotatorRegistry()
        registry2.register(
            AnnotatorSpec("emotion_category", "greedy-1", ("emotion_category",)), Greedy()
        )
        for record in manifest.records:
            record.annotation_status["emotion_category"] = "pending"
        audio = AudioAccess(manifest.sources, config.segmenter)
        stats = run_annotator("emotion_category", manifest, audio, registry2)
        assert stats.done == 0
        assert stats.failed == len(manifest.records)
        assert "not declared" in next(iter(stats.failure_reasons.values()))


class TestRunPipeline:
    def test_empty_source_list(self, small_table, tmp_path):
        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        manifest, report = run_pipeline([], config, registry)
        assert manifest.records == []
        assert not report.has_failures

    def test_fixture_fully_annotated_and_deterministic(
        self, demo_sources, small_table, tmp_path
    ):
        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        first, report = run_pipeline(demo_sources, config, registry)
        assert not report.has_failures
        for record in first.records:
            for field in ("transcript", "is_speech", "local_speaker", "global_speaker",
                          "gender", "age_years", "emotion_category", "arousal",
                          "dominance", "valence", "snr_db", "sound_events"):
                assert getattr(record, field) is not None, (record.segment_id, field)
            assert set(record.annotation_status.values()) == {"done"}
        second, _ = run_pipeline(demo_sources, config, registry)
        assert manifest_to_text(first) == manifest_to_text(second)

    def test_resume_is_idempotent(self, demo_sources, small_table, tmp_path):
        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        manifest, _ = run_pipeline(demo_sources, config, registry)
        once = manifest_to_text(manifest)
        again, report = run_pipeline(demo_sources, config, registry, resume_manifest=manifest)
        assert manifest_to_text(again) == once
        assert all(s.done == 0 or name == "asr"
                   for name, s in report.annotators.items()), report.to_dict()

    def test_music_span_flagged_not_dropped(
        self, demo_sources, small_table, demo_layout, tmp_path
    ):
        config = make_config(tmp_path)
        registry = build_stub_registry(small_table, seed=7)
        manifest, _ = run_pipeline(demo_sources, config, registry)
        music = [
            r for r in manifest.records
            if (span := span_for_segment(demo_layout, r.start_s, r.end_s)) and span.kind == "music"
        ]
        speech = [
            r for r in manifest.records
            if (span := span_for_segment(demo_layout, r.start_s, r.end_s)) and span.kind == "speech"
        ]
        assert music, "fixture must yield at least one music-contained segment"
        assert all(r.is_speech is False for r in music)
        assert all(r.is_speech is True for r in speech)
        # flagged segments stay in the manifest and keep their annotations
        assert all(r.emotion_category is not None for r in music)

    def test_unreadable_source_skipped_with_report(self, small_table, tmp_path, demo_dir):
        import shutil

        audio_dir = tmp_path / "audio"
        audio_dir.mkdir()
        shutil.copy(demo_dir / "demo.wav", audio_dir / "demo.wav")
        (audio_dir / "broken.wav").write_bytes(b"RIFFgarbage")
        sources, skipped = discover_sources(audio_dir)
        assert [name for name, _ in skipped] == ["broken.wav"]
        assert [s.source_id for s in sources] == ["demo"]

    def test_failure_isolation_leaves_other_annotators_untouched(
        self, demo_sources, small_table, tmp_path
    ):
        config = make_config(tmp_path)
        clean_registry = build_stub_registry(small_table, seed=7)
        clean, _ = run_pipeline(demo_sources, config, clean_registry)

        crashing = build_stub_registry(
            small_table,
            seed=7,
            overrides={
                "emotion_category": (
                    AnnotatorSpec("emotion_category", "exploding-1", ("emotion_category",)),
                    ExplodingAnnotator(frozenset(r.segment_id for r in clean.records)),
                )
            },
        )
        broken, report = run_pipeline(demo_sources, config, crashing)
        assert report.has_failures
        assert report.annotators["emotion_category"].failed == len(broken.records)
        for rec_clean, rec_broken in zip(clean.records, broken.records):
            for field in ("transcript", "is_speech", "local_speaker", "global_speaker",
                          "gender", "age_years", "arousal", "dominance", "valence",
                          "snr_db", "sound_events"):
                assert getattr(rec_clean, field) == getattr(rec_broken, field)
            assert rec_broken.emotion_category is None

    def test_workers_do_not_change_output(self, small_table, tmp_path):
        from voxpipe.fixtures import make_demo_wav

        audio_dir = tmp_path / "audio"
        audio_dir.mkdir()
        for i in range(3):
            make_demo_wav(audio_dir / f"ep{i}.wav", seed=100 + i)
        sources, _ = discover_sources(audio_dir)
        config1 = make_config(tmp_path, workers=1)
        config4 = make_config(tmp_path, workers=4)
        registry = build_stub_registry(small_table, seed=7)
        m1, _ = run_pipeline(sources, config1, registry)
        m4, _ = run_pipeline(sources, config4, registry)
        assert manifest_to_text(m1) == manifest_to_text(m4)


CHILD_OK = r"""
import json, sys
for line in sys.stdin:
    row = json.loads(line)
    out = {"segment_id": row["segment_id"], "status": "done",
           "fields": {"emotion_category": "happy"}}
    print(json.dumps(out))
"""

CHILD_PARTIAL = r"""
import json, sys
for i, line in enumerate(sys.stdin):
    row = json.loads(line)
    if i % 2 == 0:
        out = {"segment_id": row["segment_id"], "status": "done",
               "fields": {"emotion_category": "sad"}}
    else:
        out = {"segment_id": row["segment_id"], "status": "failed", "reason": "low confidence"}
    print(json.dumps(out))
"""

CHILD_CRASH = r"""
import sys
sys.stderr.write("model exploded\n")
sys.exit(3)
"""


def _inputs(n=4):
    return [
        SegmentInput(
            segment_id=f"s_{i:04d}", source_id="s", start_s=float(i), end_s=float(i) + 1.0,
            audio_path="/audio/s.wav",
        )
        for i in range(n)
    ]


class TestSubprocessAdapter:
    def test_happy_path(self):
        adapter = SubprocessAnnotator([sys.executable, "-c", CHILD_OK], name="kid")
        result = adapter.annotate_batch(_inputs())
        assert len(result.fields) == 4
        assert result.fields["s_0000"] == {"emotion_category": "happy"}

    def test_per_segment_failures_reported(self):
        adapter = SubprocessAnnotator([sys.executable, "-c", CHILD_PARTIAL], name="kid")
        result = adapter.annotate_batch(_inputs())
        assert len(result.fields) == 2
        assert result.failures["s_0001"] == "low confidence"

    def test_nonzero_exit_fails_batch(self):
        adapter = SubprocessAnnotator([sys.executable, "-c", CHILD_CRASH], name="kid")
        with pytest.raises(AnnotatorError, match="exited with 3"):
            adapter.annotate_batch(_inputs())

    def test_unreported_segments_marked_failed_by_accounting(self):
        child = r"""
import json, sys
lines = sys.stdin.readlines()
row = json.loads(lines[0])
print(json.dumps({"segment_id": row["segment_id"], "status": "done", "fields": {}}))
"""
        adapter = SubprocessAnnotator([sys.executable, "-c", child], name="kid")
        batch = _inputs(3)
        result = adapter.annotate_batch(batch)
        result.account_for(batch, "kid")
        assert set(result.failures) == {"s_0001", "s_0002"}

    def test_subprocess_adapter_inside_pipeline(self, demo_sources, small_table, tmp_path):
        config = make_config(tmp_path)
        registry = build_stub_registry(
            small_table,
            seed=7,
            overrides={
                "emotion_category": (
                    AnnotatorSpec("emotion_category", "child-1", ("emotion_category",),
                                  batch_size=4),
                    SubprocessAnnotator([sys.executable, "-c", CHILD_OK],
                                        name="emotion_category"),
                )
            },
        )
        manifest, report = run_pipeline(demo_sources, config, registry)
        assert not report.has_failures
        assert all(r.emotion_category == "happy" for r in manifest.records)

    def test_crashing_subprocess_adapter_gives_partial_run(
        self, demo_sources, small_table, tmp_path
    ):
        config = make_config(tmp_path)
        registry = build_stub_registry(
            small_table,
            seed=7,
            overrides={
                "emotion_category": (
                    AnnotatorSpec("emotion_category", "child-1", ("emotion_category",)),
                    SubprocessAnnotator([sys.executable, "-c", CHILD_CRASH],
                                        name="emotion_category"),
                )
            },
        )
        manifest, report = run_pipeline(demo_sources, config, registry)
        assert report.has_failures
        assert report.annotators["emotion_category"].failed == len(manifest.records)
        assert all(r.annotation_status["emotion_category"] == "failed"
                   for r in manifest.records)
        # everything else still completed
        assert all(r.snr_db is not None for r in manifest.records)

    def test_per_annotator_seeds_change_only_their_fields(
        self, demo_sources, small_table, tmp_path
    ):
        config = make_config(tmp_path)
        base = build_stub_registry(small_table, seed=7)
        reseeded = build_stub_registry(small_table, seed=7,
                                       seeds={"emotion_attributes": 99})
        m1, _ = run_pipeline(demo_sources, config, base)
        m2, _ = run_pipeline(demo_sources, config, reseeded)
        changed = sum(
            a.arousal != b.arousal for a, b in zip(m1.records, m2.records)
        )
        assert changed > 0
        for a, b in zip(m1.records, m2.records):
            assert a.emotion_category == b.emotion_category
            assert a.snr_db == b.snr_db
            assert a.transcript == b.transcript

    def test_content_based_music_stub_consistent_with_fixture(
        self, demo_dir, demo_layout, small_table
    ):
        # StubSoundEvents marks tonal segments with a high-scoring Music event
        from voxpipe.audio import read_wav
        from voxpipe.segmenter import SegmentProposal, slice_audio

        wav, rate = read_wav(demo_dir / "demo.wav")
        stub = StubSoundEvents(seed=1)
        music_piece = slice_audio(wav, SegmentProposal(20.0, 25.0), rate)
        speech_piece = slice_audio(wav, SegmentProposal(2.0, 7.0), rate)
        batch = [
            SegmentInput("m", "demo", 20.0, 25.0, "x", waveform=music_piece, rate_hz=rate),
            SegmentInput("s", "demo", 2.0, 7.0, "x", waveform=speech_piece, rate_hz=rate),
        ]
        result = stub.annotate_batch(batch)
        music_events = dict(result.fields["m"]["sound_events"])
        assert music_events.get("Music", 0.0) >= 0.85
