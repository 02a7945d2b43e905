"""Audio normalization and segment boundary adjustment.

Raw segment proposals come from the transcription adapter with slightly
misaligned edges. Boundaries are repaired from the intervening silence:
wide gaps donate a fixed extension to each neighbor, narrow gaps merge
the neighbors outright (subject to a duration cap), and file edges get
the same extension treatment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import resample_poly


class SegmenterError(ValueError):
    """Raised for invalid proposals or configuration."""


@dataclass(frozen=True)
class SegmentProposal:
    start_s: float
    end_s: float
    text: str | None = None

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class SegmenterConfig:
    silence_threshold_s: float = 0.5
    extension_s: float = 0.25
    max_merge_duration_s: float = 10.0
    target_sample_rate_hz: int = 16000

    def __post_init__(self) -> None:
        for name in ("silence_threshold_s", "extension_s", "max_merge_duration_s"):
            if getattr(self, name) <= 0:
                raise SegmenterError(f"{name} must be positive")
        if self.target_sample_rate_hz <= 0:
            raise SegmenterError("target_sample_rate_hz must be positive")
        if self.extension_s > self.silence_threshold_s / 2:
            raise SegmenterError(
                "extension_s must not exceed silence_threshold_s / 2 "
                f"({self.extension_s} > {self.silence_threshold_s / 2})"
            )


def _validate_proposals(
    proposals: list[SegmentProposal], source_duration_s: float
) -> None:
    prev_end = 0.0
    for prop in proposals:
        if not (math.isfinite(prop.start_s) and math.isfinite(prop.end_s)):
            raise SegmenterError(f"non-finite proposal bounds [{prop.start_s}, {prop.end_s}]")
        if prop.start_s >= prop.end_s:
            raise SegmenterError(f"proposal with start >= end: [{prop.start_s}, {prop.end_s}]")
        if prop.start_s < prev_end:
            raise SegmenterError(
                f"proposals unsorted or overlapping at start {prop.start_s} (previous end {prev_end})"
            )
        if prop.start_s < 0 or prop.end_s > source_duration_s:
            raise SegmenterError(
                f"proposal [{prop.start_s}, {prop.end_s}] outside [0, {source_duration_s}]"
            )
        prev_end = prop.end_s


def _merge_text(left: str | None, right: str | None) -> str | None:
    parts = [t for t in (left, right) if t is not None]
    return " ".join(parts) if parts else None


def adjust_boundaries(
    proposals: list[SegmentProposal],
    source_duration_s: float,
    config: SegmenterConfig | None = None,
) -> list[SegmentProposal]:
    """Repair proposal boundaries in one left-to-right pass.

    For each inter-segment gap g: if g exceeds the silence threshold, both
    neighbors extend into the gap by min(extension_s, g/2); otherwise the
    neighbors merge (text joined with a single space) unless the merged
    duration would exceed the cap, in which case the extension rule applies
    instead. A merged segment may keep merging rightward. Finally the first
    start and last end extend by extension_s, clamped to [0, duration].
    """
    config = config or SegmenterConfig()
    _validate_proposals(proposals, source_duration_s)
    if not proposals:
        return []

    out: list[SegmentProposal] = []
    current = proposals[0]
    for nxt in proposals[1:]:
        gap = nxt.start_s - current.end_s
        merged_duration = nxt.end_s - current.start_s
        if gap <= config.silence_threshold_s and merged_duration <= config.max_merge_duration_s:
            current = SegmentProposal(
                start_s=current.start_s,
                end_s=nxt.end_s,
                text=_merge_text(current.text, nxt.text),
            )
            continue
        ext = min(config.extension_s, gap / 2.0)
        out.append(replace(current, end_s=current.end_s + ext))
        current = replace(nxt, start_s=nxt.start_s - ext)
    out.append(current)

    out[0] = replace(out[0], start_s=max(0.0, out[0].start_s - config.extension_s))
    out[-1] = replace(
        out[-1], end_s=min(source_duration_s, out[-1].end_s + config.extension_s)
    )
    return out


def normalize_audio(
    waveform: np.ndarray, source_rate_hz: int, config: SegmenterConfig | None = None
) -> np.ndarray:
    """Downmix to mono and downsample to the target rate.

    Integer input is rescaled to [-1, 1]. Upsampling is rejected: sources
    below the target rate carry no content above their own Nyquist and are
    not admitted.
    """
    config = config or SegmenterConfig()
    target = config.target_sample_rate_hz
    if source_rate_hz < target:
        raise SegmenterError(
            f"upsampling not supported: source {source_rate_hz} Hz below target {target} Hz"
        )
    data = np.asarray(waveform)
    if np.issubdtype(data.dtype, np.integer):
        data = data.astype(np.float64) / float(np.iinfo(data.dtype).max + 1)
    else:
        data = data.astype(np.float64)
    if data.ndim == 2:
        data = data.mean(axis=1)
    elif data.ndim != 1:
        raise SegmenterError(f"waveform must be 1-D or (samples, channels), got shape {data.shape}")
    if source_rate_hz == target:
        return data
    g = math.gcd(source_rate_hz, target)
    return resample_poly(data, target // g, source_rate_hz // g)


def slice_audio(
    waveform: np.ndarray, segment: SegmentProposal, rate_hz: int
) -> np.ndarray:
    """Return samples [round(start_s * rate), round(end_s * rate))."""
    start = round(segment.start_s * rate_hz)
    end = round(segment.end_s * rate_hz)
    n = len(waveform)
    if start < 0 or end > n or start >= end:
        raise SegmenterError(
            f"segment [{segment.start_s}, {segment.end_s}] s maps to samples "
            f"[{start}, {end}) outside waveform of length {n}"
        )
    return waveform[start:end]
