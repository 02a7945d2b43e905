"""Deterministic stand-ins for the heavyweight annotation models.

Every stub is seeded pseudo-random but schema-exact, so the full pipeline
runs byte-reproducibly with no model weights. Randomness is derived per
segment from (seed, annotator, segment_id) via SHA-256, never from Python's
salted hash, so values survive process restarts. Two stubs look at the
actual audio: the speech/music classifier thresholds spectral peakiness,
and the snr annotator is the real amplitude-distribution estimator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..manifest import EMOTION_CATEGORIES, GENDERS
from ..segmenter import SegmentProposal
from ..snr import SilentSegmentError, SnrTable, estimate_snr
from .base import AnnotationBatchResult, AnnotatorRegistry, AnnotatorSpec, SegmentInput

SPEAKER_TURN_S = 15.0

_WORDS = (
    "the a to of and in that it was for on you he with as his they at be this from "
    "had not but what all were when we there can an your which their said if will "
    "each about how up out them then she many some so these would other into has more"
).split()


def _digest_ints(*parts: object) -> np.random.Generator:
    key = ":".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(words)


def _structure_int(*parts: object) -> int:
    key = ":".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def local_speaker_structure(source_id: str, start_s: float, turn_s: float = SPEAKER_TURN_S) -> int:
    """Shared turn -> speaker derivation (diarization and gender/age agree on it)."""
    n_speakers = 2 + _structure_int("voxpipe-speaker-count", source_id) % 2
    turn = int(start_s // turn_s)
    return _structure_int("voxpipe-speaker-turn", source_id, turn) % n_speakers


def spectral_peakiness(waveform: np.ndarray) -> float:
    """Peak-to-mean magnitude-spectrum ratio; tonal content scores high."""
    x = np.asarray(waveform, dtype=np.float64)
    if x.size < 256:
        return 0.0
    n = min(x.size, 16384)
    start = (x.size - n) // 2
    chunk = x[start : start + n]
    chunk = chunk - chunk.mean()
    window = np.hanning(n)
    mag = np.abs(np.fft.rfft(chunk * window))
    mean = float(mag.mean())
    if mean <= 0.0:
        return 0.0
    return float(mag.max() / mean)


def segment_embedding(
    seed: int, source_id: str, local_speaker: int, segment_id: str, dim: int = 32
) -> np.ndarray:
    """Unit embedding: a per-(source, speaker) direction plus per-segment jitter."""
    base_rng = _digest_ints(seed, "embed-base", source_id, local_speaker)
    base = base_rng.normal(size=dim)
    jitter_rng = _digest_ints(seed, "embed-jitter", segment_id)
    vec = base + 0.05 * jitter_rng.normal(size=dim)
    return vec / np.linalg.norm(vec)


@dataclass
class StubAsr:
    """Proposes transcribed 3.5-6 s segments with 0.1-0.9 s gaps."""

    seed: int = 0

    def propose(self, waveform: np.ndarray, rate_hz: int, source_id: str) -> list[SegmentProposal]:
        duration = len(waveform) / rate_hz
        rng = _digest_ints(self.seed, "asr", source_id)
        proposals: list[SegmentProposal] = []
        t = float(rng.uniform(0.05, 0.4))
        while duration - t >= 1.5:
            length = float(rng.uniform(3.5, 6.0))
            end = min(t + length, duration - 0.02)
            if end - t < 1.0:
                break
            n_words = max(1, round(2.2 * (end - t)))
            words = rng.choice(len(_WORDS), size=n_words)
            proposals.append(
                SegmentProposal(start_s=t, end_s=end, text=" ".join(_WORDS[w] for w in words))
            )
            t = end + float(rng.uniform(0.1, 0.9))
        return proposals


@dataclass
class StubSpeechMusic:
    """Flags tonal segments as music via spectral peakiness."""

    seed: int = 0
    peakiness_threshold: float = 20.0

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        result = AnnotationBatchResult()
        for item in batch:
            ratio = spectral_peakiness(item.waveform) if item.waveform is not None else 0.0
            result.fields[item.segment_id] = {"is_speech": bool(ratio < self.peakiness_threshold)}
        return result


@dataclass
class StubDiarization:
    seed: int = 0
    turn_s: float = SPEAKER_TURN_S

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        result = AnnotationBatchResult()
        for item in batch:
            local = local_speaker_structure(item.source_id, item.start_s, self.turn_s)
            result.fields[item.segment_id] = {"local_speaker": local}
        return result


@dataclass
class StubGenderAge:
    """Gender and age consistent per local speaker (shared turn structure)."""

    seed: int = 0
    turn_s: float = SPEAKER_TURN_S

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        result = AnnotationBatchResult()
        for item in batch:
            local = local_speaker_structure(item.source_id, item.start_s, self.turn_s)
            speaker_rng = _digest_ints(self.seed, "gender_age", item.source_id, local)
            gender = GENDERS[int(speaker_rng.integers(0, 2))]  # female | male
            base_age = float(speaker_rng.uniform(18.0, 75.0))
            jitter = float(_digest_ints(self.seed, "age-jitter", item.segment_id).uniform(-1.0, 1.0))
            result.fields[item.segment_id] = {
                "gender": gender,
                "age_years": round(max(18.0, base_age + jitter), 1),
            }
        return result


@dataclass
class StubEmotionCategory:
    seed: int = 0
    # Weights mimic a talk-heavy corpus where neutral dominates.
    weights: tuple[float, ...] = (0.55, 0.10, 0.20, 0.15)  # neutral, angry, happy, sad

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        result = AnnotationBatchResult()
        probs = np.asarray(self.weights) / sum(self.weights)
        for item in batch:
            rng = _digest_ints(self.seed, "emotion_category", item.segment_id)
            label = EMOTION_CATEGORIES[int(rng.choice(len(EMOTION_CATEGORIES), p=probs))]
            result.fields[item.segment_id] = {"emotion_category": label}
        return result


@dataclass
class StubEmotionAttributes:
    seed: int = 0
    low: float = 1.0
    high: float = 7.0

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        result = AnnotationBatchResult()
        for item in batch:
            rng = _digest_ints(self.seed, "emotion_attributes", item.segment_id)
            arousal, dominance, valence = rng.uniform(self.low, self.high, size=3)
            result.fields[item.segment_id] = {
                "arousal": round(float(arousal), 3),
                "dominance": round(float(dominance), 3),
                "valence": round(float(valence), 3),
            }
        return result


def sound_event_taxonomy() -> tuple[str, ...]:
    """A 500+ label taxonomy in the style of large audio taggers."""
    bases = (
        "Alarm Animal Applause Bell Bird Breathing Car Chatter Chime Clap Click Cough "
        "Creak Crowd Dog Door Drip Engine Footsteps Glass Horn Hum Insect Keyboard "
        "Knock Laughter"
    ).split()
    variants = (
        "general distant close faint loud repeated single brief sustained muffled sharp "
        "soft metallic wooden electronic mechanical outdoor indoor rhythmic irregular"
    ).split()
    labels = {f"{base} ({variant})" for base in bases for variant in variants}
    labels.update({"Music", "Speech", "Silence", "Rooster crowing", "Honking", "Siren"})
    return tuple(sorted(labels))


@dataclass
class StubSoundEvents:
    seed: int = 0
    peakiness_threshold: float = 20.0
    max_events: int = 4

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        taxonomy = sound_event_taxonomy()
        result = AnnotationBatchResult()
        for item in batch:
            rng = _digest_ints(self.seed, "sound_events", item.segment_id)
            count = int(rng.integers(1, self.max_events + 1))
            picks = rng.choice(len(taxonomy), size=count, replace=False)
            scored: dict[str, float] = {
                taxonomy[p]: round(float(rng.uniform(0.05, 0.7)), 3) for p in picks
            }
            if item.waveform is not None and spectral_peakiness(item.waveform) >= self.peakiness_threshold:
                scored["Music"] = round(float(rng.uniform(0.85, 0.99)), 3)
            events = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))
            result.fields[item.segment_id] = {"sound_events": events}
        return result


@dataclass
class WadaSnrAnnotator:
    """The real per-segment SNR estimator over a shared calibration table."""

    table: SnrTable

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        result = AnnotationBatchResult()
        for item in batch:
            if item.waveform is None:
                result.failures[item.segment_id] = "no audio available"
                continue
            try:
                value = estimate_snr(item.waveform, self.table)
            except SilentSegmentError as exc:
                result.failures[item.segment_id] = str(exc)
                continue
            result.fields[item.segment_id] = {"snr_db": round(value, 3)}
        return result


def build_stub_registry(
    snr_table: SnrTable,
    seed: int = 0,
    batch_size: int = 16,
    seeds: dict[str, int] | None = None,
    batch_sizes: dict[str, int] | None = None,
    overrides: dict[str, tuple[AnnotatorSpec, object]] | None = None,
) -> AnnotatorRegistry:
    """Registry with every pipeline slot filled by its deterministic stub.

    ``seeds`` and ``batch_sizes`` override the shared defaults per
    annotator name; ``overrides`` swaps in alternative (spec,
    implementation) pairs, e.g. an out-of-process adapter for one slot.
    """
    seeds = seeds or {}
    batch_sizes = batch_sizes or {}

    def sd(name: str) -> int:
        return seeds.get(name, seed)

    def bs(name: str) -> int:
        return batch_sizes.get(name, batch_size)

    registry = AnnotatorRegistry()
    defaults: dict[str, tuple[AnnotatorSpec, object]] = {
        "asr": (
            AnnotatorSpec("asr", "stub-asr-1", ("transcript",), bs("asr")),
            StubAsr(seed=sd("asr")),
        ),
        "speech_music": (
            AnnotatorSpec("speech_music", "stub-speech-music-1", ("is_speech",), bs("speech_music")),
            StubSpeechMusic(seed=sd("speech_music")),
        ),
        "diarization": (
            AnnotatorSpec("diarization", "stub-diarization-1", ("local_speaker",), bs("diarization")),
            StubDiarization(seed=sd("diarization")),
        ),
        "gender_age": (
            AnnotatorSpec("gender_age", "stub-gender-age-1", ("gender", "age_years"), bs("gender_age")),
            StubGenderAge(seed=sd("gender_age")),
        ),
        "emotion_category": (
            AnnotatorSpec(
                "emotion_category", "stub-emotion-cat-1", ("emotion_category",), bs("emotion_category")
            ),
            StubEmotionCategory(seed=sd("emotion_category")),
        ),
        "emotion_attributes": (
            AnnotatorSpec(
                "emotion_attributes",
                "stub-emotion-attr-1",
                ("arousal", "dominance", "valence"),
                bs("emotion_attributes"),
            ),
            StubEmotionAttributes(seed=sd("emotion_attributes")),
        ),
        "sound_events": (
            AnnotatorSpec("sound_events", "stub-sound-events-1", ("sound_events",), bs("sound_events")),
            StubSoundEvents(seed=sd("sound_events")),
        ),
        "snr": (
            AnnotatorSpec("snr", "wada-snr-1", ("snr_db",), bs("snr")),
            WadaSnrAnnotator(table=snr_table),
        ),
    }
    if overrides:
        defaults.update(overrides)
    for spec, impl in defaults.values():
        registry.register(spec, impl)
    return registry
