"""Segment record schema and the line-oriented manifest store.

A manifest is a UTF-8 text file: one JSON header line (schema version,
run metadata, audio sources) followed by one JSON object per segment
record, ordered by (source_id, start_s). Absent annotation fields are
omitted from the line; unknown fields on a record line survive a
read/write round trip untouched.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

SCHEMA_VERSION = 1

EMOTION_CATEGORIES = ("neutral", "angry", "happy", "sad")
GENDERS = ("female", "male", "unknown")

EMOTION_ATTRIBUTE_RANGE = (1.0, 7.0)

# Field kinds drive query-DSL type checking and merge validation.
FIELD_KINDS: dict[str, str] = {
    "segment_id": "string",
    "source_id": "string",
    "start_s": "number",
    "end_s": "number",
    "transcript": "string",
    "is_speech": "bool",
    "local_speaker": "number",
    "global_speaker": "string",
    "gender": "enum:gender",
    "age_years": "number",
    "emotion_category": "enum:emotion",
    "arousal": "number",
    "dominance": "number",
    "valence": "number",
    "snr_db": "number",
    "sound_events": "events",
}

ENUM_DOMAINS = {"enum:gender": GENDERS, "enum:emotion": EMOTION_CATEGORIES}

# Fields an annotator may write through merge_annotations. Identity and
# timing fields stay immutable so sortedness and uniqueness hold across
# every mutating operation.
ANNOTATION_FIELDS = (
    "transcript",
    "is_speech",
    "local_speaker",
    "global_speaker",
    "gender",
    "age_years",
    "emotion_category",
    "arousal",
    "dominance",
    "valence",
    "snr_db",
    "sound_events",
)

ANNOTATION_STATUSES = ("done", "failed", "pending")

_RECORD_FIELD_ORDER = tuple(FIELD_KINDS) + ("annotation_status",)


class ManifestError(ValueError):
    """Raised for schema violations, malformed files, and bad merges."""


@dataclass
class AudioSource:
    """Identity of one raw audio file admitted to the pipeline."""

    source_id: str
    uri: str
    sample_rate_hz: int
    duration_s: float
    channel_count: int = 1


@dataclass
class SegmentRecord:
    """One annotated utterance; a single manifest row.

    ``None`` means the annotation is absent (not yet produced), which is
    distinct from any concrete value. ``extras`` holds fields written by
    newer schema versions; they round-trip verbatim.
    """

    segment_id: str
    source_id: str
    start_s: float
    end_s: float
    transcript: str | None = None
    is_speech: bool | None = None
    local_speaker: int | None = None
    global_speaker: str | None = None
    gender: str | None = None
    age_years: float | None = None
    emotion_category: str | None = None
    arousal: float | None = None
    dominance: float | None = None
    valence: float | None = None
    snr_db: float | None = None
    sound_events: list[tuple[str, float]] | None = None
    annotation_status: dict[str, str] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def copy(self) -> "SegmentRecord":
        return replace(
            self,
            sound_events=None if self.sound_events is None else list(self.sound_events),
            annotation_status=dict(self.annotation_status),
            extras=dict(self.extras),
        )


@dataclass
class Manifest:
    """Ordered collection of segment records plus provenance."""

    schema_version: int = SCHEMA_VERSION
    sources: list[AudioSource] = field(default_factory=list)
    records: list[SegmentRecord] = field(default_factory=list)
    run_metadata: dict[str, Any] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)

    def source_by_id(self) -> dict[str, AudioSource]:
        return {s.source_id: s for s in self.sources}

    def record_by_id(self) -> dict[str, SegmentRecord]:
        return {r.segment_id: r for r in self.records}

    def sort_records(self) -> None:
        self.records.sort(key=lambda r: (r.source_id, r.start_s))


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ManifestError(msg)


def _finite(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_source(source: AudioSource) -> None:
    _check(bool(source.source_id), "source_id must be non-empty")
    _check(source.sample_rate_hz > 0, f"source {source.source_id}: sample_rate_hz must be positive")
    _check(_finite(source.duration_s) and source.duration_s > 0,
           f"source {source.source_id}: duration_s must be > 0")
    _check(source.channel_count > 0, f"source {source.source_id}: channel_count must be positive")


def validate_record(record: SegmentRecord, source: AudioSource | None = None) -> None:
    rid = record.segment_id
    _check(bool(rid), "segment_id must be non-empty")
    _check(_finite(record.start_s) and _finite(record.end_s),
           f"{rid}: start_s/end_s must be finite numbers")
    _check(0.0 <= record.start_s < record.end_s,
           f"{rid}: requires 0 <= start_s < end_s, got [{record.start_s}, {record.end_s}]")
    if source is not None:
        _check(record.end_s <= source.duration_s,
               f"{rid}: end_s {record.end_s} beyond source duration {source.duration_s}")
    if record.emotion_category is not None:
        _check(record.emotion_category in EMOTION_CATEGORIES,
               f"{rid}: emotion_category {record.emotion_category!r} not in {EMOTION_CATEGORIES}")
    if record.gender is not None:
        _check(record.gender in GENDERS, f"{rid}: gender {record.gender!r} not in {GENDERS}")
    if record.age_years is not None:
        _check(_finite(record.age_years) and record.age_years >= 0, f"{rid}: age_years must be >= 0")
    lo, hi = EMOTION_ATTRIBUTE_RANGE
    for name in ("arousal", "dominance", "valence"):
        value = getattr(record, name)
        if value is not None:
            _check(_finite(value) and lo <= value <= hi,
                   f"{rid}: {name} {value} outside [{lo}, {hi}]")
    if record.snr_db is not None:
        _check(_finite(record.snr_db), f"{rid}: snr_db must be finite")
    if record.sound_events is not None:
        for label, score in record.sound_events:
            _check(isinstance(label, str) and label, f"{rid}: sound event label must be non-empty")
            _check(_finite(score) and 0.0 <= score <= 1.0,
                   f"{rid}: sound event score {score} outside [0, 1]")
    for annotator, status in record.annotation_status.items():
        _check(status in ANNOTATION_STATUSES,
               f"{rid}: annotation_status[{annotator!r}] = {status!r} invalid")
    for key in record.extras:
        _check(key not in _RECORD_FIELD_ORDER, f"{rid}: extras key {key!r} shadows a schema field")


def validate_manifest(manifest: Manifest) -> None:
    seen_sources: set[str] = set()
    for source in manifest.sources:
        validate_source(source)
        _check(source.source_id not in seen_sources,
               f"duplicate source_id {source.source_id!r}")
        seen_sources.add(source.source_id)
    by_id = manifest.source_by_id()
    seen_segments: set[str] = set()
    prev_key: tuple[str, float] | None = None
    for record in manifest.records:
        source = by_id.get(record.source_id)
        _check(source is not None,
               f"{record.segment_id}: source_id {record.source_id!r} not in manifest sources")
        validate_record(record, source)
        _check(record.segment_id not in seen_segments,
               f"duplicate segment_id {record.segment_id!r}")
        seen_segments.add(record.segment_id)
        key = (record.source_id, record.start_s)
        if prev_key is not None:
            _check(key >= prev_key, "records not sorted by (source_id, start_s)")
        prev_key = key


# ---------------------------------------------------------------------------
# serialization


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def record_to_dict(record: SegmentRecord) -> dict[str, Any]:
    row: dict[str, Any] = {}
    for name in FIELD_KINDS:
        value = getattr(record, name)
        if value is None:
            continue
        if name == "sound_events":
            value = [[label, score] for label, score in value]
        row[name] = value
    if record.annotation_status:
        row["annotation_status"] = dict(record.annotation_status)
    row.update(record.extras)
    return row


def record_from_dict(row: dict[str, Any]) -> SegmentRecord:
    known: dict[str, Any] = {}
    extras: dict[str, Any] = {}
    for key, value in row.items():
        if key in FIELD_KINDS or key == "annotation_status":
            known[key] = value
        else:
            extras[key] = value
    for name in ("start_s", "end_s", "age_years", "arousal", "dominance", "valence", "snr_db"):
        if known.get(name) is not None:
            known[name] = float(known[name])
    if known.get("local_speaker") is not None:
        known["local_speaker"] = int(known["local_speaker"])
    if known.get("sound_events") is not None:
        known["sound_events"] = [(str(l), float(s)) for l, s in known["sound_events"]]
    missing = [k for k in ("segment_id", "source_id", "start_s", "end_s") if k not in known]
    if missing:
        raise ManifestError(f"record missing required fields: {missing}")
    return SegmentRecord(
        annotation_status=dict(known.pop("annotation_status", {})), extras=extras, **known
    )


def manifest_to_text(manifest: Manifest) -> str:
    validate_manifest(manifest)
    header: dict[str, Any] = {
        "schema_version": manifest.schema_version,
        "run_metadata": manifest.run_metadata,
        "sources": [
            {
                "source_id": s.source_id,
                "uri": s.uri,
                "sample_rate_hz": s.sample_rate_hz,
                "duration_s": s.duration_s,
                "channel_count": s.channel_count,
            }
            for s in manifest.sources
        ],
    }
    header.update(manifest.extras)
    lines = [_dumps(header)]
    lines.extend(_dumps(record_to_dict(r)) for r in manifest.records)
    return "\n".join(lines) + "\n"


def manifest_from_text(text: str) -> Manifest:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ManifestError("empty manifest file: missing header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed header at line 1: {exc.msg}") from exc
    if not isinstance(header, dict) or "schema_version" not in header:
        raise ManifestError("malformed header at line 1: expected object with schema_version")
    version = header["schema_version"]
    if not isinstance(version, int):
        raise ManifestError("malformed header at line 1: schema_version must be an integer")
    if version > SCHEMA_VERSION:
        raise ManifestError(
            f"manifest schema_version {version} is newer than supported {SCHEMA_VERSION}; "
            "upgrade this tool to read it"
        )
    sources = []
    for entry in header.get("sources", []):
        sources.append(
            AudioSource(
                source_id=str(entry["source_id"]),
                uri=str(entry["uri"]),
                sample_rate_hz=int(entry["sample_rate_hz"]),
                duration_s=float(entry["duration_s"]),
                channel_count=int(entry.get("channel_count", 1)),
            )
        )
    extras = {
        k: v for k, v in header.items() if k not in ("schema_version", "run_metadata", "sources")
    }
    manifest = Manifest(
        schema_version=version,
        sources=sources,
        records=[],
        run_metadata=dict(header.get("run_metadata", {})),
        extras=extras,
    )
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            row = json.loads(line)
            if not isinstance(row, dict):
                raise ValueError("expected object")
            manifest.records.append(record_from_dict(row))
        except (json.JSONDecodeError, ManifestError, TypeError, ValueError, KeyError) as exc:
            message = exc.msg if isinstance(exc, json.JSONDecodeError) else exc
            raise ManifestError(f"malformed record at line {lineno}: {message}") from exc
    return manifest


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    """Validate then persist; nothing is written if validation fails."""
    text = manifest_to_text(manifest)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot write manifest to {path}: {exc}") from exc


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest from {path}: {exc}") from exc
    return manifest_from_text(text)


def manifest_sha256(manifest: Manifest) -> str:
    return hashlib.sha256(manifest_to_text(manifest).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# mutation


def merge_annotations(
    manifest: Manifest, annotator_name: str, outputs: dict[str, dict[str, Any]]
) -> Manifest:
    """Overwrite annotation fields on matching records and mark them done.

    Validates every output before applying any, so a bad batch leaves the
    manifest untouched. Idempotent for identical outputs; merges for
    disjoint annotator names commute.
    """
    by_id = manifest.record_by_id()
    unknown = sorted(sid for sid in outputs if sid not in by_id)
    if unknown:
        raise ManifestError(f"merge_annotations: unknown segment ids {unknown}")
    for sid, fields in outputs.items():
        for name in fields:
            if name not in FIELD_KINDS and name != "annotation_status":
                raise ManifestError(f"merge_annotations: {name!r} is not a schema field")
            if name not in ANNOTATION_FIELDS:
                raise ManifestError(
                    f"merge_annotations: {name!r} is not a mergeable annotation field"
                )
        probe = by_id[sid].copy()
        _apply_fields(probe, fields)
        validate_record(probe)
    for sid, fields in outputs.items():
        record = by_id[sid]
        _apply_fields(record, fields)
        record.annotation_status[annotator_name] = "done"
    return manifest


def _apply_fields(record: SegmentRecord, fields: dict[str, Any]) -> None:
    for name, value in fields.items():
        if name == "sound_events" and value is not None:
            value = [(str(l), float(s)) for l, s in value]
        setattr(record, name, value)


def set_annotation_status(
    manifest: Manifest, annotator_name: str, segment_ids: Iterable[str], status: str
) -> None:
    if status not in ANNOTATION_STATUSES:
        raise ManifestError(f"invalid annotation status {status!r}")
    by_id = manifest.record_by_id()
    for sid in segment_ids:
        if sid not in by_id:
            raise ManifestError(f"unknown segment id {sid!r}")
        by_id[sid].annotation_status[annotator_name] = status


# ---------------------------------------------------------------------------
# reporting


@dataclass
class CorpusSummary:
    total_hours: float
    utterance_count: int
    mean_duration_s: float
    global_speaker_count: int
    unlinked_local_cluster_count: int
    gender_counts: dict[str, int]
    emotion_counts: dict[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "total_hours": self.total_hours,
            "utterance_count": self.utterance_count,
            "mean_duration_s": self.mean_duration_s,
            "global_speaker_count": self.global_speaker_count,
            "unlinked_local_cluster_count": self.unlinked_local_cluster_count,
            "gender_counts": dict(self.gender_counts),
            "emotion_counts": dict(self.emotion_counts),
        }


def corpus_summary(manifest: Manifest) -> CorpusSummary:
    """Report the headline corpus numbers (hours, speakers, class counts)."""
    total_s = sum(r.duration_s for r in manifest.records)
    count = len(manifest.records)
    speakers = {r.global_speaker for r in manifest.records if r.global_speaker is not None}
    unlinked = {
        (r.source_id, r.local_speaker)
        for r in manifest.records
        if r.local_speaker is not None and r.global_speaker is None
    }
    genders = {g: 0 for g in GENDERS}
    emotions = {e: 0 for e in EMOTION_CATEGORIES}
    for record in manifest.records:
        if record.gender is not None:
            genders[record.gender] += 1
        if record.emotion_category is not None:
            emotions[record.emotion_category] += 1
    return CorpusSummary(
        total_hours=total_s / 3600.0,
        utterance_count=count,
        mean_duration_s=(total_s / count) if count else 0.0,
        global_speaker_count=len(speakers),
        unlinked_local_cluster_count=len(unlinked),
        gender_counts=genders,
        emotion_counts=emotions,
    )
