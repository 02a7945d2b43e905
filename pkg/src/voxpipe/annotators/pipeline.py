"""Batch orchestration: decode -> segment -> annotate -> link -> manifest.

Annotators run per batch with failure isolation: a crashing batch marks
only its own segments failed and the run continues. Re-running a pipeline
over its own output is a no-op because only pending/failed segments are
processed.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import audio as audio_io
from ..manifest import (
    AudioSource,
    Manifest,
    ManifestError,
    SegmentRecord,
    merge_annotations,
    set_annotation_status,
)
from ..segmenter import (
    SegmenterConfig,
    SegmenterError,
    SegmentProposal,
    adjust_boundaries,
    normalize_audio,
    slice_audio,
)
from ..snr import SnrTable, build_snr_table
from ..speakers import (
    AnchorLabel,
    LocalCluster,
    assign_global_speakers,
    read_anchor_file,
    update_global_centroid,
)
from .base import ANNOTATOR_NAMES, AnnotatorError, AnnotatorRegistry, SegmentInput
from .stubs import segment_embedding

SPEAKER_LINK_STAGE = "speaker_link"


class PipelineError(ValueError):
    """Raised for invalid configuration or fatal orchestration errors."""


@dataclass
class AnnotatorSettings:
    name: str
    seed: int | None = None
    batch_size: int | None = None


@dataclass
class PipelineConfig:
    output_manifest: str
    seed: int = 0
    annotators: list[AnnotatorSettings] = field(default_factory=list)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    snr_table_path: str | None = None
    snr_table_build: dict[str, Any] = field(default_factory=dict)
    anchors_path: str | None = None
    link_threshold: float = 0.7
    embedding_seed: int | None = None
    embedding_dim: int = 32
    workers: int | None = None  # None: one thread per available core
    created_at: str | None = None
    config_sha256: str = ""

    def annotator_seed(self, name: str) -> int:
        for settings in self.annotators:
            if settings.name == name and settings.seed is not None:
                return settings.seed
        return self.seed

    def annotator_batch_size(self, name: str, default: int = 16) -> int:
        for settings in self.annotators:
            if settings.name == name and settings.batch_size is not None:
                return settings.batch_size
        return default


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a declarative pipeline config (JSON)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PipelineError(f"cannot load pipeline config {path}: {exc}") from exc
    if not isinstance(raw, dict) or "output_manifest" not in raw:
        raise PipelineError(f"{path}: config must be an object with output_manifest")
    digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()
    try:
        annotators = [
            AnnotatorSettings(
                name=str(entry["name"]),
                seed=entry.get("seed"),
                batch_size=entry.get("batch_size"),
            )
            for entry in raw.get("annotators", [])
        ]
        for settings in annotators:
            if settings.name not in ANNOTATOR_NAMES:
                raise ValueError(f"unknown annotator {settings.name!r}")
        segmenter = SegmenterConfig(**raw.get("segmenter", {}))
        config = PipelineConfig(
            output_manifest=str(raw["output_manifest"]),
            seed=int(raw.get("seed", 0)),
            annotators=annotators,
            segmenter=segmenter,
            snr_table_path=raw.get("snr_table_path"),
            snr_table_build=dict(raw.get("snr_table_build", {})),
            anchors_path=raw.get("anchors_path"),
            link_threshold=float(raw.get("link_threshold", 0.7)),
            embedding_seed=raw.get("embedding_seed"),
            embedding_dim=int(raw.get("embedding_dim", 32)),
            workers=None if raw.get("workers") is None else int(raw["workers"]),
            created_at=raw.get("created_at"),
            config_sha256=digest,
        )
    except (KeyError, TypeError, ValueError, SegmenterError) as exc:
        raise PipelineError(f"{path}: invalid config: {exc}") from exc
    for ref in (config.snr_table_path, config.anchors_path):
        if ref is not None and not Path(ref).exists():
            raise PipelineError(f"{path}: referenced path does not exist: {ref}")
    return config


def load_or_build_snr_table(config: PipelineConfig) -> SnrTable:
    if config.snr_table_path is not None:
        return SnrTable.load(config.snr_table_path)
    return build_snr_table(**config.snr_table_build)


class AudioAccess:
    """Decoded, normalized waveforms by source id with a small LRU cache."""

    def __init__(
        self,
        sources: list[AudioSource],
        segmenter_config: SegmenterConfig | None = None,
        cache_size: int = 4,
    ):
        self.config = segmenter_config or SegmenterConfig()
        self.sources = {s.source_id: s for s in sources}
        self.cache_size = cache_size
        self._cache: OrderedDict[str, np.ndarray] = OrderedDict()

    @property
    def rate_hz(self) -> int:
        return self.config.target_sample_rate_hz

    def source_waveform(self, source_id: str) -> np.ndarray:
        if source_id in self._cache:
            self._cache.move_to_end(source_id)
            return self._cache[source_id]
        source = self.sources.get(source_id)
        if source is None:
            raise PipelineError(f"unknown source {source_id!r}")
        raw, rate = audio_io.read_wav(source.uri)
        waveform = normalize_audio(raw, rate, self.config)
        self._cache[source_id] = waveform
        while len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return waveform

    def segment_input(self, record: SegmentRecord) -> SegmentInput:
        waveform = self.source_waveform(record.source_id)
        piece = slice_audio(
            waveform,
            SegmentProposal(record.start_s, record.end_s),
            self.rate_hz,
        )
        return SegmentInput(
            segment_id=record.segment_id,
            source_id=record.source_id,
            start_s=record.start_s,
            end_s=record.end_s,
            audio_path=self.sources[record.source_id].uri,
            waveform=piece,
            rate_hz=self.rate_hz,
        )


@dataclass
class AnnotatorRunStats:
    done: int = 0
    failed: int = 0
    skipped: int = 0
    failure_reasons: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"done": self.done, "failed": self.failed, "skipped": self.skipped}


@dataclass
class RunReport:
    annotators: dict[str, AnnotatorRunStats] = field(default_factory=dict)
    skipped_sources: list[tuple[str, str]] = field(default_factory=list)
    source_count: int = 0
    segment_count: int = 0

    @property
    def has_failures(self) -> bool:
        return bool(self.skipped_sources) or any(
            stats.failed for stats in self.annotators.values()
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "annotators": {name: s.to_dict() for name, s in sorted(self.annotators.items())},
            "skipped_sources": [list(item) for item in self.skipped_sources],
            "source_count": self.source_count,
            "segment_count": self.segment_count,
        }


def run_annotator(
    name: str,
    manifest: Manifest,
    audio: AudioAccess,
    registry: AnnotatorRegistry,
) -> AnnotatorRunStats:
    """Process pending/failed segments for one annotator, batch by batch.

    A crash inside a batch marks every segment of that batch failed with
    the reason and the run moves on.
    """
    spec = registry.spec(name)
    impl = registry.implementation(name)
    stats = AnnotatorRunStats()
    targets: list[SegmentRecord] = []
    for record in manifest.records:
        status = record.annotation_status.get(name, "pending")
        if status == "done":
            stats.skipped += 1
        else:
            targets.append(record)
    allowed = set(spec.output_fields)
    for start in range(0, len(targets), spec.batch_size):
        chunk = targets[start : start + spec.batch_size]
        try:
            batch = [audio.segment_input(record) for record in chunk]
            result = impl.annotate_batch(batch)
            result.account_for(batch, name)
            for sid, fields in result.fields.items():
                stray = set(fields) - allowed
                if stray:
                    raise AnnotatorError(
                        f"{name}: output fields {sorted(stray)} not declared in spec"
                    )
            merge_annotations(manifest, name, result.fields)
            failures = dict(result.failures)
        except Exception as exc:  # noqa: BLE001 - failure isolation is the contract
            failures = {
                record.segment_id: f"{type(exc).__name__}: {exc}" for record in chunk
            }
        else:
            stats.done += len(result.fields)
        if failures:
            set_annotation_status(manifest, name, failures, "failed")
            stats.failed += len(failures)
            stats.failure_reasons.update(failures)
    return stats


def discover_sources(audio_dir: str | Path) -> tuple[list[AudioSource], list[tuple[str, str]]]:
    """Probe every .wav under a directory; unreadable files are reported, not fatal."""
    audio_dir = Path(audio_dir)
    if not audio_dir.is_dir():
        raise PipelineError(f"audio directory not found: {audio_dir}")
    sources: list[AudioSource] = []
    skipped: list[tuple[str, str]] = []
    for path in sorted(audio_dir.glob("*.wav")):
        try:
            rate, duration, channels = audio_io.probe_wav(path)
        except audio_io.AudioReadError as exc:
            skipped.append((path.name, str(exc)))
            continue
        sources.append(
            AudioSource(
                source_id=path.stem,
                uri=str(path),
                sample_rate_hz=rate,
                duration_s=duration,
                channel_count=channels,
            )
        )
    return sources, skipped


def segment_source(
    source: AudioSource,
    waveform: np.ndarray,
    registry: AnnotatorRegistry,
    config: PipelineConfig,
) -> list[SegmentRecord]:
    """ASR proposals -> boundary adjustment -> fresh records for one source."""
    asr = registry.implementation("asr")
    proposals = asr.propose(waveform, config.segmenter.target_sample_rate_hz, source.source_id)
    adjusted = adjust_boundaries(proposals, source.duration_s, config.segmenter)
    pending = {
        name: "pending" for name in registry.names() if name != "asr"
    }
    pending[SPEAKER_LINK_STAGE] = "pending"
    records = []
    for index, prop in enumerate(adjusted):
        status = dict(pending)
        status["asr"] = "done"
        records.append(
            SegmentRecord(
                segment_id=f"{source.source_id}_{index:04d}",
                source_id=source.source_id,
                start_s=prop.start_s,
                end_s=prop.end_s,
                transcript=prop.text,
                annotation_status=status,
            )
        )
    return records


def link_speakers(
    manifest: Manifest,
    config: PipelineConfig,
) -> AnnotatorRunStats:
    """Consolidate local diarization clusters into global speaker labels."""
    stats = AnnotatorRunStats()
    embed_seed = config.embedding_seed if config.embedding_seed is not None else config.seed
    grouped: dict[tuple[str, int], list[SegmentRecord]] = {}
    for record in manifest.records:
        if record.annotation_status.get(SPEAKER_LINK_STAGE, "pending") == "done":
            stats.skipped += 1
            continue
        if record.local_speaker is None:
            continue
        grouped.setdefault((record.source_id, record.local_speaker), []).append(record)
    if not grouped:
        return stats
    clusters = []
    for (source_id, local_id), records in sorted(grouped.items()):
        embeddings = [
            segment_embedding(embed_seed, source_id, local_id, r.segment_id, config.embedding_dim)
            for r in records
        ]
        clusters.append(
            LocalCluster(
                source_id=source_id,
                local_id=local_id,
                segment_ids=[r.segment_id for r in records],
                centroid=update_global_centroid(embeddings),
            )
        )
    anchors: list[AnchorLabel] = []
    if config.anchors_path is not None:
        anchors = read_anchor_file(config.anchors_path)
    known_segments = {sid for c in clusters for sid in c.segment_ids}
    anchors = [a for a in anchors if a.source_id in {c.source_id for c in clusters}]
    for anchor in anchors:
        if anchor.segment_id not in known_segments:
            raise PipelineError(
                f"anchor segment {anchor.segment_id!r} not present in any cluster"
            )
    assignment = assign_global_speakers(clusters, anchors, config.link_threshold)
    outputs = {}
    for cluster in clusters:
        label = assignment[(cluster.source_id, cluster.local_id)]
        for sid in cluster.segment_ids:
            outputs[sid] = {"global_speaker": label}
    merge_annotations(manifest, SPEAKER_LINK_STAGE, outputs)
    stats.done = len(outputs)
    return stats


def run_pipeline(
    sources: list[AudioSource],
    config: PipelineConfig,
    registry: AnnotatorRegistry,
    resume_manifest: Manifest | None = None,
) -> tuple[Manifest, RunReport]:
    """Full pipeline over a source list; resumable and deterministic.

    Sources already carrying records in ``resume_manifest`` are not
    re-segmented; per-segment annotators then process whatever is still
    pending or failed.
    """
    if "asr" not in registry:
        raise PipelineError("pipeline requires a registered asr adapter")
    report = RunReport()
    manifest = resume_manifest if resume_manifest is not None else Manifest()
    manifest.run_metadata = _run_metadata(config, registry)

    known_ids = {s.source_id for s in manifest.sources}
    segmented = {r.source_id for r in manifest.records}
    new_sources = [s for s in sources if s.source_id not in known_ids]
    manifest.sources.extend(new_sources)
    manifest.sources.sort(key=lambda s: s.source_id)

    todo = [s for s in sorted(sources, key=lambda s: s.source_id) if s.source_id not in segmented]

    def prepare(source: AudioSource) -> tuple[AudioSource, list[SegmentRecord] | None, str]:
        try:
            raw, rate = audio_io.read_wav(source.uri)
            waveform = normalize_audio(raw, rate, config.segmenter)
            return source, segment_source(source, waveform, registry, config), ""
        except (audio_io.AudioReadError, SegmenterError, ManifestError) as exc:
            return source, None, str(exc)

    workers = config.workers if config.workers is not None else (os.cpu_count() or 1)
    workers = max(1, workers)
    if workers == 1 or len(todo) <= 1:
        prepared = [prepare(s) for s in todo]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            prepared = list(pool.map(prepare, todo))
    for source, records, reason in prepared:
        if records is None:
            report.skipped_sources.append((source.source_id, reason))
            manifest.sources = [s for s in manifest.sources if s.source_id != source.source_id]
            continue
        manifest.records.extend(records)
    manifest.sort_records()

    audio = AudioAccess(manifest.sources, config.segmenter)
    for name in registry.names():
        if name == "asr":
            continue
        report.annotators[name] = run_annotator(name, manifest, audio, registry)
    report.annotators[SPEAKER_LINK_STAGE] = link_speakers(manifest, config)

    asr_stats = AnnotatorRunStats()
    for record in manifest.records:
        if record.annotation_status.get("asr") == "done":
            asr_stats.done += 1
    report.annotators["asr"] = asr_stats
    report.source_count = len(manifest.sources)
    report.segment_count = len(manifest.records)
    return manifest, report


def _run_metadata(config: PipelineConfig, registry: AnnotatorRegistry) -> dict[str, Any]:
    metadata: dict[str, Any] = {
        "config_sha256": config.config_sha256,
        "seed": config.seed,
        "annotator_seeds": {name: config.annotator_seed(name) for name in registry.names()},
        "annotator_versions": registry.versions(),
        "link_threshold": config.link_threshold,
        "segmenter": {
            "silence_threshold_s": config.segmenter.silence_threshold_s,
            "extension_s": config.segmenter.extension_s,
            "max_merge_duration_s": config.segmenter.max_merge_duration_s,
            "target_sample_rate_hz": config.segmenter.target_sample_rate_hz,
        },
    }
    if config.created_at is not None:
        metadata["created_at"] = config.created_at
    return metadata
