"""Distribution reports over a manifest: histograms, category counts, exports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .manifest import ENUM_DOMAINS, FIELD_KINDS, CorpusSummary, Manifest


class StatsError(ValueError):
    """Raised for non-numeric fields, bad edges, or unknown formats."""


DEFAULT_SNR_EDGES = [float(v) for v in range(-20, 101, 10)]
DEFAULT_ATTRIBUTE_EDGES = [1.0 + 0.5 * i for i in range(13)]

REPORT_FORMATS = ("structured-text", "delimited-table", "plot-image")


@dataclass
class Histogram:
    field: str
    bin_edges: list[float]
    counts: list[int]
    below: int = 0
    above: int = 0
    absent: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "field": self.field,
            "bin_edges": list(self.bin_edges),
            "counts": list(self.counts),
            "below": self.below,
            "above": self.above,
            "absent": self.absent,
        }


@dataclass
class CategoryCounts:
    field: str
    counts: dict[str, int]
    absent: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"field": self.field, "counts": dict(self.counts), "absent": self.absent}


def histogram(manifest: Manifest, field_name: str, bin_edges: list[float]) -> Histogram:
    """Left-closed right-open binning [e_i, e_{i+1}) of a numeric field.

    A value landing exactly on an interior edge belongs to the bin starting
    there. Out-of-range values count as below/above overflow; records
    without the field count as absent.
    """
    if FIELD_KINDS.get(field_name) != "number":
        raise StatsError(f"field {field_name!r} is not numeric")
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise StatsError("bin_edges must be at least two strictly increasing values")
    counts = [0] * (edges.size - 1)
    below = above = absent = 0
    for record in manifest.records:
        value = getattr(record, field_name)
        if value is None:
            absent += 1
        elif value < edges[0]:
            below += 1
        elif value >= edges[-1]:
            above += 1
        else:
            counts[int(np.searchsorted(edges, value, side="right")) - 1] += 1
    return Histogram(field_name, [float(e) for e in edges], counts, below, above, absent)


def category_counts(manifest: Manifest, field_name: str) -> CategoryCounts:
    """Counts per enum label, zero-filled over the full domain."""
    kind = FIELD_KINDS.get(field_name, "")
    domain = ENUM_DOMAINS.get(kind)
    if domain is None:
        raise StatsError(f"field {field_name!r} is not an enum field")
    counts = {label: 0 for label in domain}
    absent = 0
    for record in manifest.records:
        value = getattr(record, field_name)
        if value is None:
            absent += 1
        else:
            counts[value] += 1
    return CategoryCounts(field_name, counts, absent)


@dataclass
class StatsReport:
    summary: CorpusSummary | None = None
    histograms: list[Histogram] = field(default_factory=list)
    categories: list[CategoryCounts] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "summary": None if self.summary is None else self.summary.to_dict(),
            "histograms": [h.to_dict() for h in self.histograms],
            "categories": [c.to_dict() for c in self.categories],
        }


def _single_histogram(report: StatsReport, fmt: str) -> Histogram:
    if len(report.histograms) != 1:
        raise StatsError(f"format {fmt!r} needs exactly one histogram, got {len(report.histograms)}")
    return report.histograms[0]


def histogram_csv(hist: Histogram) -> str:
    lines = ["bin_lo,bin_hi,count"]
    for lo, hi, count in zip(hist.bin_edges, hist.bin_edges[1:], hist.counts):
        lines.append(f"{lo!r},{hi!r},{count}")
    return "\n".join(lines) + "\n"


def emit_report(report: StatsReport, path: str | Path, fmt: str) -> None:
    """Write a report; structured formats are byte-deterministic."""
    path = Path(path)
    if fmt == "structured-text":
        payload = json.dumps(report.to_dict(), sort_keys=True, indent=1, allow_nan=False)
        path.write_text(payload + "\n", encoding="utf-8")
    elif fmt == "delimited-table":
        path.write_text(histogram_csv(_single_histogram(report, fmt)), encoding="utf-8")
    elif fmt == "plot-image":
        _plot_histogram(_single_histogram(report, fmt), path)
    else:
        raise StatsError(f"unknown report format {fmt!r}; one of {', '.join(REPORT_FORMATS)}")


def _plot_histogram(hist: Histogram, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    edges = np.asarray(hist.bin_edges)
    widths = np.diff(edges)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(edges[:-1], hist.counts, width=widths, align="edge", edgecolor="black", linewidth=0.5)
    ax.set_xlabel(hist.field)
    ax.set_ylabel("segments")
    ax.set_xticks(edges)
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100)
    plt.close(fig)
