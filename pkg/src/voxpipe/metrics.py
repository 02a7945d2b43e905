"""Objective evaluation kernels: edit-distance rates, EER, SV acceptance."""

from __future__ import annotations

import bisect
import string
from dataclasses import dataclass
from typing import Sequence


class MetricError(ValueError):
    """Raised for undefined rates and degenerate trial lists."""


@dataclass(frozen=True)
class EditOps:
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    @property
    def rate(self) -> float:
        return (self.substitutions + self.deletions + self.insertions) / self.reference_length


def edit_ops(ref_tokens: Sequence[str], hyp_tokens: Sequence[str]) -> EditOps:
    """Minimal unit-cost alignment counts.

    Ties during backtrace prefer substitution over deletion over insertion,
    fixing one deterministic decomposition of the minimal cost.
    """
    n, m = len(ref_tokens), len(hyp_tokens)
    if n == 0:
        raise MetricError("undefined rate: empty reference")
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        ref_tok = ref_tokens[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (ref_tok != hyp_tokens[j - 1])
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)
    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (ref_tokens[i - 1] != hyp_tokens[j - 1]):
            if ref_tokens[i - 1] != hyp_tokens[j - 1]:
                subs += 1
            i -= 1
            j -= 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditOps(subs, dels, ins, n)


@dataclass(frozen=True)
class TextNormalization:
    lowercase: bool = True
    strip_punctuation: bool = True
    collapse_whitespace: bool = True
    cer_includes_spaces: bool = False


_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_text(text: str, config: TextNormalization | None = None) -> str:
    config = config or TextNormalization()
    if config.lowercase:
        text = text.lower()
    if config.strip_punctuation:
        text = text.translate(_PUNCT_TABLE)
    if config.collapse_whitespace:
        text = " ".join(text.split())
    return text


def _chars(text: str, config: TextNormalization) -> list[str]:
    if config.cer_includes_spaces:
        return list(text)
    return [c for c in text if c != " "]


def wer(ref_text: str, hyp_text: str, config: TextNormalization | None = None) -> float:
    config = config or TextNormalization()
    ref = normalize_text(ref_text, config).split()
    hyp = normalize_text(hyp_text, config).split()
    if not ref:
        raise MetricError("undefined rate: reference empty after normalization")
    return edit_ops(ref, hyp).rate


def cer(ref_text: str, hyp_text: str, config: TextNormalization | None = None) -> float:
    config = config or TextNormalization()
    ref = _chars(normalize_text(ref_text, config), config)
    hyp = _chars(normalize_text(hyp_text, config), config)
    if not ref:
        raise MetricError("undefined rate: reference empty after normalization")
    return edit_ops(ref, hyp).rate


def _corpus_rate(
    refs: Sequence[str], hyps: Sequence[str], config: TextNormalization, char_level: bool
) -> float:
    if len(refs) != len(hyps):
        raise MetricError(f"reference/hypothesis line counts differ: {len(refs)} vs {len(hyps)}")
    total_errors = 0
    total_length = 0
    for ref_text, hyp_text in zip(refs, hyps):
        norm_ref = normalize_text(ref_text, config)
        norm_hyp = normalize_text(hyp_text, config)
        if char_level:
            ref_toks: Sequence[str] = _chars(norm_ref, config)
            hyp_toks: Sequence[str] = _chars(norm_hyp, config)
        else:
            ref_toks = norm_ref.split()
            hyp_toks = norm_hyp.split()
        if not ref_toks:
            raise MetricError("undefined rate: a reference line is empty after normalization")
        ops = edit_ops(ref_toks, hyp_toks)
        total_errors += ops.substitutions + ops.deletions + ops.insertions
        total_length += ops.reference_length
    if total_length == 0:
        raise MetricError("undefined rate: empty reference corpus")
    return total_errors / total_length


def wer_corpus(refs: Sequence[str], hyps: Sequence[str],
               config: TextNormalization | None = None) -> float:
    """Aggregate WER over line-aligned utterances: sum(errors) / sum(ref words)."""
    return _corpus_rate(refs, hyps, config or TextNormalization(), char_level=False)


def cer_corpus(refs: Sequence[str], hyps: Sequence[str],
               config: TextNormalization | None = None) -> float:
    return _corpus_rate(refs, hyps, config or TextNormalization(), char_level=True)


# ---------------------------------------------------------------------------
# speaker-verification kernels

GENUINE = "genuine"
IMPOSTOR = "impostor"


@dataclass(frozen=True)
class TrialScore:
    kind: str  # genuine | impostor
    score: float

    def __post_init__(self) -> None:
        if self.kind not in (GENUINE, IMPOSTOR):
            raise MetricError(f"trial kind must be genuine or impostor, got {self.kind!r}")


def eer_threshold(scores: Sequence[TrialScore]) -> tuple[float, float]:
    """Equal-error-rate calibration over labeled trial scores.

    Candidate thresholds are the distinct scores plus a sentinel above the
    maximum; FAR(t) is the impostor fraction with score >= t and FRR(t)
    the genuine fraction with score < t. FAR - FRR is non-increasing in t,
    so the crossing is unique; it is located by linear interpolation
    between adjacent sweep points, taking the smallest threshold on a
    plateau of exact equality.
    """
    genuine = sorted(t.score for t in scores if t.kind == GENUINE)
    impostor = sorted(t.score for t in scores if t.kind == IMPOSTOR)
    if not genuine or not impostor:
        raise MetricError("EER needs at least one genuine and one impostor trial")

    thresholds = sorted(set(genuine) | set(impostor))
    thresholds.append(thresholds[-1] + 1.0)  # sentinel: FAR 0, FRR 1

    n_gen, n_imp = len(genuine), len(impostor)

    def far(t: float) -> float:
        return (n_imp - bisect.bisect_left(impostor, t)) / n_imp

    def frr(t: float) -> float:
        return bisect.bisect_left(genuine, t) / n_gen

    prev_t = thresholds[0]
    prev_far, prev_frr = far(prev_t), frr(prev_t)
    prev_diff = prev_far - prev_frr
    if prev_diff <= 0.0:
        return prev_t, prev_frr
    for t in thresholds[1:]:
        cur_far, cur_frr = far(t), frr(t)
        diff = cur_far - cur_frr
        if diff <= 0.0:
            if diff == 0.0:
                return t, cur_frr
            alpha = prev_diff / (prev_diff - diff)
            threshold = prev_t + alpha * (t - prev_t)
            eer = prev_frr + alpha * (cur_frr - prev_frr)
            return threshold, eer
        prev_t, prev_far, prev_frr, prev_diff = t, cur_far, cur_frr, diff
    raise MetricError("no FAR/FRR crossing found")  # unreachable: sentinel forces diff = -1


def interpolated_rates(scores: Sequence[TrialScore], threshold: float) -> tuple[float, float]:
    """FAR and FRR at a threshold, linearly interpolated between sweep points."""
    genuine = sorted(t.score for t in scores if t.kind == GENUINE)
    impostor = sorted(t.score for t in scores if t.kind == IMPOSTOR)
    if not genuine or not impostor:
        raise MetricError("needs at least one genuine and one impostor trial")
    thresholds = sorted(set(genuine) | set(impostor))
    thresholds.append(thresholds[-1] + 1.0)

    def far(t: float) -> float:
        return (len(impostor) - bisect.bisect_left(impostor, t)) / len(impostor)

    def frr(t: float) -> float:
        return bisect.bisect_left(genuine, t) / len(genuine)

    if threshold <= thresholds[0]:
        return far(thresholds[0]), frr(thresholds[0])
    if threshold >= thresholds[-1]:
        return far(thresholds[-1]), frr(thresholds[-1])
    hi = bisect.bisect_right(thresholds, threshold)
    lo = hi - 1
    t0, t1 = thresholds[lo], thresholds[hi]
    alpha = 0.0 if t1 == t0 else (threshold - t0) / (t1 - t0)
    far_i = far(t0) + alpha * (far(t1) - far(t0))
    frr_i = frr(t0) + alpha * (frr(t1) - frr(t0))
    return far_i, frr_i


def sv_acceptance(similarities: Sequence[float], threshold: float) -> float:
    """Fraction of trials accepted: similarity >= threshold (inclusive)."""
    if len(similarities) == 0:
        raise MetricError("acceptance rate undefined for empty trial list")
    return sum(1 for s in similarities if s >= threshold) / len(similarities)
