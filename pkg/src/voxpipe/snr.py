"""Blind SNR estimation from the waveform amplitude distribution.

Speech amplitudes are modeled as gamma-distributed (shape 0.4) and noise
as Gaussian. The gain-invariant statistic

    G = ln(mean(|x|)) - mean(ln(|x|))

grows with the speech share of the mixture, from ~0.409 for pure Gaussian
noise up to ln(k) - digamma(k) for pure gamma(k) speech (~1.645 at k=0.4).
A Monte Carlo table maps SNR to the expected G for synthetic mixtures;
estimation inverts the table by linear interpolation, clamped to the grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

AMPLITUDE_EPS = 1e-20

DEFAULT_GRID_DB = tuple(float(v) for v in range(-20, 101))
DEFAULT_GAMMA_SHAPE = 0.4
DEFAULT_TRIALS_PER_POINT = 32
DEFAULT_SAMPLES_PER_TRIAL = 16000
DEFAULT_SEED = 1422


class SilentSegmentError(ValueError):
    """Raised when a waveform has no sample above the amplitude guard."""


class SnrTableError(ValueError):
    """Raised for invalid tables or a Monte Carlo run too noisy to order."""


def gain_invariant_statistic(waveform: np.ndarray) -> float:
    """Jensen gap of the amplitude distribution; 0 iff all amplitudes equal.

    Exact zeros (and anything below the 1e-20 guard) are excluded so that
    digital silence cannot drive the log moment to -inf.
    """
    amps = np.abs(np.asarray(waveform, dtype=np.float64).ravel())
    amps = amps[amps > AMPLITUDE_EPS]
    if amps.size == 0:
        raise SilentSegmentError("silent segment: no sample above amplitude guard")
    g = float(np.log(amps.mean()) - np.log(amps).mean())
    return max(g, 0.0)


def synthesize_mixture(
    snr_db: float,
    n_samples: int,
    rng: np.random.Generator,
    gamma_shape: float = DEFAULT_GAMMA_SHAPE,
) -> np.ndarray:
    """Gamma-amplitude speech plus Gaussian noise at an exact realized SNR.

    Noise is rescaled against the realized sample powers so that
    10*log10(P_speech / P_noise) equals snr_db for this draw.
    """
    amps = rng.gamma(gamma_shape, 1.0, n_samples)
    signs = rng.integers(0, 2, n_samples) * 2 - 1
    speech = amps * signs
    speech_power = float(np.mean(speech * speech))
    noise = rng.normal(0.0, 1.0, n_samples)
    raw_power = float(np.mean(noise * noise))
    noise *= np.sqrt(speech_power / (10.0 ** (snr_db / 10.0) * raw_power))
    return speech + noise


@dataclass
class SnrTable:
    """Monotone map from SNR (dB) to the expected mixture statistic."""

    snr_grid_db: list[float]
    statistic_values: list[float]
    gamma_shape: float = DEFAULT_GAMMA_SHAPE
    trials_per_point: int = DEFAULT_TRIALS_PER_POINT
    samples_per_trial: int = DEFAULT_SAMPLES_PER_TRIAL
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        grid = np.asarray(self.snr_grid_db, dtype=np.float64)
        vals = np.asarray(self.statistic_values, dtype=np.float64)
        if grid.size == 0 or grid.size != vals.size:
            raise SnrTableError("grid and statistic columns must be non-empty and equal length")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise SnrTableError("snr_grid_db must be strictly increasing")
        if vals.size > 1 and not np.all(np.diff(vals) > 0):
            raise SnrTableError("statistic_values must be strictly monotone")

    def save(self, path: str | Path) -> None:
        payload = {
            "snr_grid_db": list(self.snr_grid_db),
            "statistic_values": list(self.statistic_values),
            "gamma_shape": self.gamma_shape,
            "trials_per_point": self.trials_per_point,
            "samples_per_trial": self.samples_per_trial,
            "seed": self.seed,
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "SnrTable":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(
                snr_grid_db=[float(v) for v in payload["snr_grid_db"]],
                statistic_values=[float(v) for v in payload["statistic_values"]],
                gamma_shape=float(payload["gamma_shape"]),
                trials_per_point=int(payload["trials_per_point"]),
                samples_per_trial=int(payload["samples_per_trial"]),
                seed=int(payload["seed"]),
            )
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SnrTableError):
                raise
            raise SnrTableError(f"cannot load SNR table from {path}: {exc}") from exc


def _isotonic_non_decreasing(values: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators fit under the non-decreasing constraint."""
    level = list(values.astype(np.float64))
    weight = [1.0] * len(level)
    span = [1] * len(level)
    i = 0
    while i < len(level) - 1:
        if level[i] > level[i + 1]:
            merged = (level[i] * weight[i] + level[i + 1] * weight[i + 1]) / (
                weight[i] + weight[i + 1]
            )
            level[i : i + 2] = [merged]
            weight[i : i + 2] = [weight[i] + weight[i + 1]]
            span[i : i + 2] = [span[i] + span[i + 1]]
            if i > 0:
                i -= 1
        else:
            i += 1
    return np.repeat(level, span)


def build_snr_table(
    snr_grid_db: list[float] | None = None,
    gamma_shape: float = DEFAULT_GAMMA_SHAPE,
    trials_per_point: int = DEFAULT_TRIALS_PER_POINT,
    samples_per_trial: int = DEFAULT_SAMPLES_PER_TRIAL,
    seed: int = DEFAULT_SEED,
    max_isotonic_adjustment: float = 0.05,
) -> SnrTable:
    """Monte Carlo calibration of the SNR -> statistic map.

    Each grid point averages the statistic over seeded synthetic mixtures;
    the curve saturates at high SNR where sampling noise can exceed the
    true increments, so a pool-adjacent-violators pass restores ordering
    (strictness by an epsilon ramp). Adjustments beyond the tolerance mean
    the trial budget is too small to order the curve and raise an error.
    Deterministic for a fixed seed: every (point, trial) derives its own
    generator from (seed, point index, trial index).
    """
    grid = np.asarray(
        DEFAULT_GRID_DB if snr_grid_db is None else snr_grid_db, dtype=np.float64
    )
    if trials_per_point < 1 or samples_per_trial < 1:
        raise SnrTableError("trials_per_point and samples_per_trial must be >= 1")
    raw = np.empty(grid.size)
    for gi, rho in enumerate(grid):
        acc = 0.0
        for trial in range(trials_per_point):
            rng = np.random.default_rng([seed, gi, trial])
            acc += gain_invariant_statistic(
                synthesize_mixture(float(rho), samples_per_trial, rng, gamma_shape)
            )
        raw[gi] = acc / trials_per_point
    iso = _isotonic_non_decreasing(raw)
    worst = float(np.max(np.abs(iso - raw))) if grid.size else 0.0
    if worst > max_isotonic_adjustment:
        raise SnrTableError(
            f"raw table non-monotone beyond tolerance (adjustment {worst:.4f} > "
            f"{max_isotonic_adjustment}): increase trials_per_point or samples_per_trial"
        )
    strict = iso.copy()
    for i in range(1, strict.size):
        if strict[i] <= strict[i - 1]:
            strict[i] = strict[i - 1] + 1e-9
    return SnrTable(
        snr_grid_db=[float(v) for v in grid],
        statistic_values=[float(v) for v in strict],
        gamma_shape=gamma_shape,
        trials_per_point=trials_per_point,
        samples_per_trial=samples_per_trial,
        seed=seed,
    )


def estimate_snr(waveform: np.ndarray, table: SnrTable) -> float:
    """Invert the table at the waveform's statistic; clamped to the grid.

    Exactly scale-invariant: estimate(c * x) == estimate(x) for any c > 0
    up to floating-point noise in the log moments.
    """
    g = gain_invariant_statistic(waveform)
    vals = np.asarray(table.statistic_values)
    grid = np.asarray(table.snr_grid_db)
    return float(np.interp(g, vals, grid))
