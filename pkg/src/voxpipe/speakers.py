"""Consolidation of per-file speaker clusters into a global inventory.

Each file carries locally numbered diarization clusters; one manually
labeled anchor segment per file seeds the global identity. Remaining
clusters join the nearest global speaker by centroid cosine similarity
or receive a synthetic unk_<source>_<local> label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class SpeakerLinkError(ValueError):
    """Raised for degenerate embeddings or inconsistent anchors."""


@dataclass
class LocalCluster:
    source_id: str
    local_id: int
    segment_ids: list[str]
    centroid: np.ndarray

    def __post_init__(self) -> None:
        if not self.segment_ids:
            raise SpeakerLinkError(f"cluster ({self.source_id}, {self.local_id}) has no segments")
        self.centroid = np.asarray(self.centroid, dtype=np.float64)
        norm = float(np.linalg.norm(self.centroid))
        if norm == 0.0 or not np.isfinite(norm):
            raise SpeakerLinkError(f"cluster ({self.source_id}, {self.local_id}) centroid degenerate")
        if abs(norm - 1.0) > 1e-6:
            raise SpeakerLinkError(
                f"cluster ({self.source_id}, {self.local_id}) centroid not unit-norm ({norm:.6f})"
            )


@dataclass(frozen=True)
class AnchorLabel:
    source_id: str
    segment_id: str
    global_speaker: str


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise SpeakerLinkError("cosine similarity undefined for zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def update_global_centroid(member_centroids: Sequence[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of member centroids, re-normalized to unit length."""
    if len(member_centroids) == 0:
        raise SpeakerLinkError("centroid update needs at least one member")
    mean = np.mean(np.asarray(member_centroids, dtype=np.float64), axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        raise SpeakerLinkError("degenerate centroid: member mean is the zero vector")
    return mean / norm


def assign_global_speakers(
    clusters: Sequence[LocalCluster],
    anchors: Sequence[AnchorLabel],
    threshold: float = 0.7,
) -> dict[tuple[str, int], str]:
    """Label every cluster with exactly one global speaker id.

    Anchored clusters take their anchor label first; remaining clusters
    (sorted by (source_id, local_id)) join the best-matching existing
    global speaker when similarity to its growing centroid reaches the
    threshold, else found a fresh unk_<source>_<local> identity. The
    input order of ``clusters`` never affects the result.
    """
    if not (0.0 < threshold < 1.0):
        raise SpeakerLinkError(f"threshold must be in (0, 1), got {threshold}")
    anchors_by_source: dict[str, AnchorLabel] = {}
    for anchor in anchors:
        if anchor.source_id in anchors_by_source:
            raise SpeakerLinkError(f"duplicate anchor for source {anchor.source_id!r}")
        anchors_by_source[anchor.source_id] = anchor

    ordered = sorted(clusters, key=lambda c: (c.source_id, c.local_id))
    seen: set[tuple[str, int]] = set()
    for cluster in ordered:
        key = (cluster.source_id, cluster.local_id)
        if key in seen:
            raise SpeakerLinkError(f"duplicate cluster {key}")
        seen.add(key)

    assignment: dict[tuple[str, int], str] = {}
    members: dict[str, list[np.ndarray]] = {}
    centroids: dict[str, np.ndarray] = {}

    def join(label: str, cluster: LocalCluster) -> None:
        assignment[(cluster.source_id, cluster.local_id)] = label
        members.setdefault(label, []).append(cluster.centroid)
        centroids[label] = update_global_centroid(members[label])

    unassigned: list[LocalCluster] = []
    for cluster in ordered:
        anchor = anchors_by_source.get(cluster.source_id)
        if anchor is not None and anchor.segment_id in cluster.segment_ids:
            join(anchor.global_speaker, cluster)
        else:
            unassigned.append(cluster)

    matched_sources = {key[0] for key in assignment}
    for source_id, anchor in anchors_by_source.items():
        if source_id not in matched_sources and any(c.source_id == source_id for c in ordered):
            raise SpeakerLinkError(
                f"anchor segment {anchor.segment_id!r} not found in any cluster of "
                f"source {source_id!r}"
            )

    for cluster in unassigned:
        best_label: str | None = None
        best_sim = -2.0
        for label in sorted(centroids):
            sim = cosine_similarity(cluster.centroid, centroids[label])
            if sim > best_sim:
                best_label, best_sim = label, sim
        if best_label is not None and best_sim >= threshold:
            join(best_label, cluster)
        else:
            join(f"unk_{cluster.source_id}_{cluster.local_id}", cluster)
    return assignment


def read_anchor_file(path: str | Path) -> list[AnchorLabel]:
    """Load anchors from a JSONL file of (source_id, segment_id, global_speaker)."""
    path = Path(path)
    anchors: list[AnchorLabel] = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpeakerLinkError(f"cannot read anchors from {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            anchors.append(
                AnchorLabel(
                    source_id=str(row["source_id"]),
                    segment_id=str(row["segment_id"]),
                    global_speaker=str(row["global_speaker"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SpeakerLinkError(f"{path}: malformed anchor at line {lineno}: {exc}") from exc
    return anchors


def write_anchor_file(path: str | Path, anchors: Sequence[AnchorLabel]) -> None:
    lines = [
        json.dumps(
            {
                "source_id": a.source_id,
                "segment_id": a.segment_id,
                "global_speaker": a.global_speaker,
            },
            sort_keys=True,
        )
        for a in anchors
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
