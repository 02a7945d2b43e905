"""Adapter contract shared by every per-segment annotator.

Annotators receive batches of segment descriptors (with the sliced
waveform attached) and return partial record fields keyed by segment id.
The registry enforces unique names and disjoint output-field ownership so
that after a full run every populated field was written by exactly one
annotator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence, runtime_checkable

import numpy as np

from ..manifest import ANNOTATION_FIELDS
from ..segmenter import SegmentProposal

ANNOTATOR_NAMES = (
    "asr",
    "speech_music",
    "diarization",
    "gender_age",
    "emotion_category",
    "emotion_attributes",
    "sound_events",
    "snr",
)


class AnnotatorError(ValueError):
    """Raised for registry misuse: duplicate names, field collisions."""


@dataclass(frozen=True)
class AnnotatorSpec:
    name: str
    version: str
    output_fields: tuple[str, ...]
    batch_size: int = 16

    def __post_init__(self) -> None:
        if self.name not in ANNOTATOR_NAMES:
            raise AnnotatorError(
                f"unknown annotator name {self.name!r}; one of {', '.join(ANNOTATOR_NAMES)}"
            )
        if not self.output_fields:
            raise AnnotatorError(f"annotator {self.name!r} declares no output fields")
        for fname in self.output_fields:
            if fname not in ANNOTATION_FIELDS:
                raise AnnotatorError(
                    f"annotator {self.name!r} output field {fname!r} is not an annotation field"
                )
        if self.batch_size < 1:
            raise AnnotatorError("batch_size must be a positive integer")


@dataclass
class SegmentInput:
    """What an annotator sees for one segment."""

    segment_id: str
    source_id: str
    start_s: float
    end_s: float
    audio_path: str
    waveform: np.ndarray | None = None
    rate_hz: int = 0


@dataclass
class AnnotationBatchResult:
    """Per-segment outcome of one batch; every input id appears exactly once."""

    fields: dict[str, dict[str, Any]] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    def account_for(self, batch: Sequence[SegmentInput], adapter_name: str) -> None:
        """Mark unreported segments failed; reject ids reported twice or unknown."""
        ids = [item.segment_id for item in batch]
        id_set = set(ids)
        reported = set(self.fields) | set(self.failures)
        duplicated = set(self.fields) & set(self.failures)
        if duplicated:
            raise AnnotatorError(
                f"{adapter_name}: segments reported as both done and failed: {sorted(duplicated)}"
            )
        stray = reported - id_set
        if stray:
            raise AnnotatorError(f"{adapter_name}: outputs for unknown segments {sorted(stray)}")
        for sid in ids:
            if sid not in reported:
                self.failures[sid] = "not reported by adapter"


@runtime_checkable
class SegmentAnnotator(Protocol):
    """Per-segment annotator: consumes a batch, returns its result."""

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult: ...


@runtime_checkable
class TranscribingSegmenter(Protocol):
    """The asr adapter: proposes transcribed segments for a whole source."""

    def propose(
        self, waveform: np.ndarray, rate_hz: int, source_id: str
    ) -> list[SegmentProposal]: ...


class AnnotatorRegistry:
    """Name -> (spec, implementation) map with collision checks."""

    def __init__(self) -> None:
        self._entries: dict[str, tuple[AnnotatorSpec, Any]] = {}

    def register(self, spec: AnnotatorSpec, implementation: Any) -> None:
        if spec.name in self._entries:
            raise AnnotatorError(f"annotator {spec.name!r} already registered")
        claimed: dict[str, str] = {}
        for name, (other, _) in self._entries.items():
            for fname in other.output_fields:
                claimed[fname] = name
        for fname in spec.output_fields:
            if fname in claimed:
                raise AnnotatorError(
                    f"annotator {spec.name!r} claims field {fname!r} already owned by "
                    f"{claimed[fname]!r}"
                )
        if spec.name == "asr":
            if not isinstance(implementation, TranscribingSegmenter):
                raise AnnotatorError("asr adapter must implement propose()")
        elif not isinstance(implementation, SegmentAnnotator):
            raise AnnotatorError(f"annotator {spec.name!r} must implement annotate_batch()")
        self._entries[spec.name] = (spec, implementation)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def spec(self, name: str) -> AnnotatorSpec:
        return self._get(name)[0]

    def implementation(self, name: str) -> Any:
        return self._get(name)[1]

    def versions(self) -> dict[str, str]:
        return {name: spec.version for name, (spec, _) in sorted(self._entries.items())}

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def _get(self, name: str) -> tuple[AnnotatorSpec, Any]:
        if name not in self._entries:
            raise AnnotatorError(f"annotator {name!r} not registered")
        return self._entries[name]
