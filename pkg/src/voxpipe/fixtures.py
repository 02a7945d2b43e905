"""Deterministic demo audio for tests and demos.

Synthesizes a podcast-like file from labeled spans: speech-like spans are
gamma-amplitude noise (optionally buried in Gaussian noise at a chosen
SNR), music spans are a sustained chord. The span layout is the ground
truth that content-based annotators are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import write_wav
from .snr import synthesize_mixture


@dataclass(frozen=True)
class SpanInfo:
    kind: str  # speech | music | silence
    start_s: float
    end_s: float
    snr_db: float | None = None


DEMO_LAYOUT: tuple[SpanInfo, ...] = (
    SpanInfo("speech", 0.0, 18.0, snr_db=45.0),
    SpanInfo("music", 18.0, 30.0),
    SpanInfo("speech", 30.0, 48.0, snr_db=8.0),
    SpanInfo("speech", 48.0, 60.0, snr_db=25.0),
)


def _speech_span(n: int, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    return synthesize_mixture(snr_db, n, rng)


def _music_span(n: int, rate: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / rate
    chord = np.zeros(n)
    for freq in (220.0, 277.18, 329.63, 440.0):
        phase = float(rng.uniform(0, 2 * np.pi))
        chord += np.sin(2 * np.pi * freq * t + phase)
    chord += 0.01 * rng.normal(size=n)
    return chord


def make_demo_wav(
    path: str | Path,
    layout: tuple[SpanInfo, ...] = DEMO_LAYOUT,
    rate_hz: int = 16000,
    seed: int = 91,
) -> tuple[SpanInfo, ...]:
    """Write a labeled synthetic episode; returns the span layout."""
    duration = layout[-1].end_s
    n_total = round(duration * rate_hz)
    signal = np.zeros(n_total)
    rng = np.random.default_rng(seed)
    for span in layout:
        i0, i1 = round(span.start_s * rate_hz), round(span.end_s * rate_hz)
        n = i1 - i0
        if span.kind == "speech":
            piece = _speech_span(n, span.snr_db if span.snr_db is not None else 40.0, rng)
        elif span.kind == "music":
            piece = _music_span(n, rate_hz, rng)
        elif span.kind == "silence":
            piece = np.zeros(n)
        else:
            raise ValueError(f"unknown span kind {span.kind!r}")
        peak = float(np.max(np.abs(piece))) if n else 0.0
        if peak > 0:
            piece = piece * (0.5 / peak)
        signal[i0:i1] = piece
    write_wav(path, signal, rate_hz)
    return layout


def make_demo_corpus(
    directory: str | Path, seed: int = 91
) -> dict[str, tuple[SpanInfo, ...]]:
    """Write the bundled demo episode into a directory; returns layouts by stem."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return {"demo": make_demo_wav(directory / "demo.wav", seed=seed)}


def span_for_segment(
    layout: tuple[SpanInfo, ...], start_s: float, end_s: float
) -> SpanInfo | None:
    """The span fully containing [start_s, end_s], or None if it straddles."""
    for span in layout:
        if span.start_s <= start_s and end_s <= span.end_s:
            return span
    return None
