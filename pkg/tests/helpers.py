"""Independent oracles and randomized generators shared by the test suite.

Everything here deliberately re-derives expected behavior through a
different route than the implementation under test: naive scans, plain
recursion, dense sweeps, and hand simulation.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from voxpipe.manifest import (
    EMOTION_CATEGORIES,
    GENDERS,
    AudioSource,
    Manifest,
    SegmentRecord,
)
from voxpipe.query import (
    And,
    Comparison,
    ContainsText,
    HasEvent,
    HasField,
    Not,
    Or,
)
from voxpipe.segmenter import SegmentProposal

# ---------------------------------------------------------------------------
# segmenter oracle: hand simulation of the boundary rules with an event log


def naive_adjust(proposals, duration, silence=0.5, extension=0.25, max_merge=10.0):
    """Reference simulation of the boundary rules; logs every decision.

    Events: ("merge", gap) and ("extend", gap, applied_extension).
    """
    events = []
    if not proposals:
        return [], events
    segs = [[p.start_s, p.end_s, p.text] for p in proposals]
    result = [segs[0]]
    for seg in segs[1:]:
        cur = result[-1]
        gap = seg[0] - cur[1]
        if gap <= silence and (seg[1] - cur[0]) <= max_merge:
            events.append(("merge", gap))
            texts = [t for t in (cur[2], seg[2]) if t is not None]
            cur[1] = seg[1]
            cur[2] = " ".join(texts) if texts else None
        else:
            ext = min(extension, gap / 2.0)
            events.append(("extend", gap, ext))
            cur[1] += ext
            result.append([seg[0] - ext, seg[1], seg[2]])
    result[0][0] = max(0.0, result[0][0] - extension)
    result[-1][1] = min(duration, result[-1][1] + extension)
    return [SegmentProposal(s, e, t) for s, e, t in result], events


def random_proposals(rng, duration=120.0):
    """Sorted, non-overlapping proposals inside [0, duration]."""
    proposals = []
    t = float(rng.uniform(0.0, 2.0))
    while True:
        length = float(rng.uniform(0.5, 8.0))
        gap = float(rng.choice([rng.uniform(0.0, 0.4), rng.uniform(0.4, 0.7), rng.uniform(0.7, 3.0)]))
        end = t + length
        if end > duration:
            break
        text = None if rng.random() < 0.2 else f"w{len(proposals)}"
        proposals.append(SegmentProposal(t, end, text))
        t = end + gap
        if len(proposals) >= 40:
            break
    return proposals


# ---------------------------------------------------------------------------
# edit-distance oracle: exhaustive recursion over all alignments


def exhaustive_edit_distance(ref: tuple[str, ...], hyp: tuple[str, ...]) -> int:
    @lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        best = go(i + 1, j + 1) + (ref[i] != hyp[j])
        best = min(best, go(i + 1, j) + 1)  # deletion
        best = min(best, go(i, j + 1) + 1)  # insertion
        return best

    return go(0, 0)


# ---------------------------------------------------------------------------
# EER oracle: dense threshold sweep of the stated formula


def dense_sweep_eer(genuine, impostor, steps=20001):
    """Locate the FAR=FRR crossing by brute-force bisection on FAR-FRR.

    FAR and FRR are evaluated at every distinct score (plus a sentinel)
    and treated as piecewise-linear in between, matching the stated
    formula; the crossing is then found by dense scan + bisection rather
    than by the implementation's closed-form interpolation step.
    """
    genuine = np.sort(np.asarray(genuine, dtype=np.float64))
    impostor = np.sort(np.asarray(impostor, dtype=np.float64))
    points = np.unique(np.concatenate([genuine, impostor]))
    points = np.append(points, points[-1] + 1.0)
    far_vals = np.array([np.mean(impostor >= t) for t in points])
    frr_vals = np.array([np.mean(genuine < t) for t in points])

    def far(t):
        return float(np.interp(t, points, far_vals))

    def frr(t):
        return float(np.interp(t, points, frr_vals))

    def diff(t):
        return far(t) - frr(t)

    grid = np.linspace(points[0], points[-1], steps)
    diffs = np.interp(grid, points, far_vals) - np.interp(grid, points, frr_vals)
    k = int(np.argmax(diffs <= 0.0))
    if k == 0:
        t_star = float(grid[0])
    else:
        a, b = float(grid[k - 1]), float(grid[k])
        for _ in range(100):
            mid = (a + b) / 2
            if diff(mid) > 0:
                a = mid
            else:
                b = mid
        t_star = b
    return t_star, frr(t_star)


# ---------------------------------------------------------------------------
# manifest generator (plain rng, JSON-native values only)

_EVENT_LABELS = ("Music", "Laughter", "Dog (distant)", "Bell (soft)", "Honking")


def random_record(rng, source: AudioSource, index: int, with_extras=False) -> SegmentRecord:
    start = round(float(rng.uniform(0, source.duration_s - 1.0)), 3)
    end = round(float(min(source.duration_s, start + rng.uniform(0.2, 8.0))), 3)
    if end <= start:
        end = round(start + 0.2, 3)

    def maybe(value):
        return value if rng.random() < 0.7 else None

    record = SegmentRecord(
        segment_id=f"{source.source_id}_{index:04d}",
        source_id=source.source_id,
        start_s=start,
        end_s=end,
        transcript=maybe(" ".join(f"tok{int(v)}" for v in rng.integers(0, 50, 4))),
        is_speech=maybe(bool(rng.random() < 0.8)),
        local_speaker=maybe(int(rng.integers(0, 4))),
        global_speaker=maybe(f"spk_{int(rng.integers(0, 6))}"),
        gender=maybe(str(rng.choice(GENDERS))),
        age_years=maybe(round(float(rng.uniform(5, 90)), 1)),
        emotion_category=maybe(str(rng.choice(EMOTION_CATEGORIES))),
        arousal=maybe(round(float(rng.uniform(1, 7)), 3)),
        dominance=maybe(round(float(rng.uniform(1, 7)), 3)),
        valence=maybe(round(float(rng.uniform(1, 7)), 3)),
        snr_db=maybe(round(float(rng.uniform(-20, 100)), 2)),
        sound_events=maybe(
            [
                (str(rng.choice(_EVENT_LABELS)), round(float(rng.uniform(0, 1)), 3))
                for _ in range(int(rng.integers(1, 4)))
            ]
        ),
        annotation_status={"asr": "done", "snr": str(rng.choice(["pending", "done", "failed"]))},
    )
    if with_extras and rng.random() < 0.5:
        record.extras = {
            "future_field": int(rng.integers(0, 100)),
            "nested": {"flag": bool(rng.random() < 0.5)},
        }
    return record


def random_manifest(rng, max_records=8, with_extras=False) -> Manifest:
    n_sources = int(rng.integers(1, 4))
    sources = [
        AudioSource(
            source_id=f"src{si}",
            uri=f"/audio/src{si}.wav",
            sample_rate_hz=int(rng.choice([16000, 44100, 48000])),
            duration_s=round(float(rng.uniform(30, 600)), 2),
            channel_count=int(rng.integers(1, 3)),
        )
        for si in range(n_sources)
    ]
    records = []
    for si, source in enumerate(sources):
        for ri in range(int(rng.integers(0, max_records // n_sources + 1))):
            records.append(random_record(rng, source, ri, with_extras))
    manifest = Manifest(
        sources=sources,
        records=records,
        run_metadata={"seed": int(rng.integers(0, 10**6)), "tool": "test"},
    )
    manifest.sort_records()
    return manifest


# ---------------------------------------------------------------------------
# query AST generator and an independent dict-based evaluator

_NUMERIC_FIELDS = ("start_s", "end_s", "local_speaker", "age_years", "arousal",
                   "dominance", "valence", "snr_db")
_STRING_FIELDS = ("transcript", "segment_id", "source_id", "global_speaker")
_ALL_FIELDS = _NUMERIC_FIELDS + _STRING_FIELDS + (
    "is_speech", "emotion_category", "gender", "sound_events")
_OPS = ("<", "<=", ">", ">=", "==", "!=")


def random_ast(rng, depth=3):
    roll = rng.random()
    if depth <= 0 or roll < 0.55:
        return _random_leaf(rng)
    if roll < 0.70:
        return Not(random_ast(rng, depth - 1))
    node = And if roll < 0.85 else Or
    return node(random_ast(rng, depth - 1), random_ast(rng, depth - 1))


def _random_leaf(rng):
    which = rng.random()
    if which < 0.45:
        field = str(rng.choice(_NUMERIC_FIELDS))
        op = str(rng.choice(_OPS))
        if field in ("arousal", "dominance", "valence"):
            value = round(float(rng.uniform(1, 7)), 2)
        elif field == "snr_db":
            value = round(float(rng.uniform(-20, 100)), 1)
        elif field == "local_speaker":
            value = float(rng.integers(0, 4))
        elif field == "age_years":
            value = round(float(rng.uniform(5, 90)), 1)
        else:
            value = round(float(rng.uniform(0, 600)), 2)
        return Comparison(field, op, value)
    if which < 0.60:
        kind = rng.random()
        if kind < 0.4:
            return Comparison("emotion_category", str(rng.choice(["==", "!="])),
                              str(rng.choice(EMOTION_CATEGORIES)))
        if kind < 0.7:
            return Comparison("gender", str(rng.choice(["==", "!="])), str(rng.choice(GENDERS)))
        return Comparison("is_speech", str(rng.choice(["==", "!="])), bool(rng.random() < 0.5))
    if which < 0.72:
        return Comparison("global_speaker", str(rng.choice(["==", "!="])),
                          f"spk_{int(rng.integers(0, 6))}")
    if which < 0.82:
        return ContainsText("transcript", f"tok{int(rng.integers(0, 50))}")
    if which < 0.92:
        return HasField(str(rng.choice(_ALL_FIELDS)))
    min_score = round(float(rng.uniform(0, 1)), 2) if rng.random() < 0.5 else None
    return HasEvent(str(rng.choice(_EVENT_LABELS)), min_score)


def naive_eval(expr, record: SegmentRecord) -> bool:
    """Independent evaluator working over a plain dict view of the record."""
    row = {name: getattr(record, name) for name in _ALL_FIELDS}
    return _naive_eval_row(expr, row)


def _naive_eval_row(expr, row):
    if isinstance(expr, Comparison):
        value = row[expr.field]
        if value is None:
            return False
        table = {
            "<": lambda a, b: a < b,
            "<=": lambda a, b: a <= b,
            ">": lambda a, b: a > b,
            ">=": lambda a, b: a >= b,
            "==": lambda a, b: a == b,
            "!=": lambda a, b: a != b,
        }
        return bool(table[expr.op](value, expr.value))
    if isinstance(expr, ContainsText):
        value = row[expr.field]
        return value is not None and expr.needle in value
    if isinstance(expr, HasField):
        return row[expr.field] is not None
    if isinstance(expr, HasEvent):
        events = row["sound_events"]
        if events is None:
            return False
        for label, score in events:
            if label == expr.label and (expr.min_score is None or score >= expr.min_score):
                return True
        return False
    if isinstance(expr, Not):
        return not _naive_eval_row(expr.operand, row)
    if isinstance(expr, And):
        return _naive_eval_row(expr.left, row) and _naive_eval_row(expr.right, row)
    if isinstance(expr, Or):
        return _naive_eval_row(expr.left, row) or _naive_eval_row(expr.right, row)
    raise AssertionError(f"unknown node {expr!r}")


def random_orthonormal(rng, dim: int) -> np.ndarray:
    """Haar-ish random rotation via QR of a Gaussian matrix."""
    matrix = rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(matrix)
    return q * np.sign(np.diag(r))
