"""WAV container I/O for the pipeline (16-bit PCM via the stdlib).

Waveforms are float64 arrays in [-1, 1]: shape (n,) for mono or
(n, channels) for multichannel.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np


class AudioReadError(ValueError):
    """Raised when a file cannot be decoded as supported PCM audio."""


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode a 16-bit PCM wave file to (waveform, sample_rate_hz)."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            frames = wav.getnframes()
            raw = wav.readframes(frames)
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioReadError(f"{path}: {exc}") from exc
    if width != 2:
        raise AudioReadError(f"{path}: only 16-bit PCM supported, got sample width {width}")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        data = data.reshape(-1, channels)
    return data, rate


def write_wav(path: str | Path, waveform: np.ndarray, rate_hz: int) -> None:
    """Encode a float waveform in [-1, 1] as 16-bit PCM."""
    data = np.asarray(waveform, dtype=np.float64)
    if data.ndim == 1:
        channels = 1
    elif data.ndim == 2:
        channels = data.shape[1]
    else:
        raise ValueError(f"waveform must be 1-D or 2-D, got shape {data.shape}")
    pcm = (np.clip(data, -1.0, 1.0) * 32767.0).round().astype("<i2")
    with wave.open(str(Path(path)), "wb") as wav:
        wav.setnchannels(channels)
        wav.setsampwidth(2)
        wav.setframerate(rate_hz)
        wav.writeframes(pcm.tobytes())


def probe_wav(path: str | Path) -> tuple[int, float, int]:
    """Return (sample_rate_hz, duration_s, channel_count) without decoding."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            rate = wav.getframerate()
            frames = wav.getnframes()
            channels = wav.getnchannels()
            if wav.getsampwidth() != 2:
                raise AudioReadError(f"{path}: only 16-bit PCM supported")
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioReadError(f"{path}: {exc}") from exc
    if rate <= 0 or frames <= 0:
        raise AudioReadError(f"{path}: empty or invalid wave header")
    return rate, frames / rate, channels
