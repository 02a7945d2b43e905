"""voxpipe: sourcing richly annotated speech datasets from raw long-form audio."""

from .manifest import (
    AudioSource,
    CorpusSummary,
    Manifest,
    ManifestError,
    SegmentRecord,
    corpus_summary,
    merge_annotations,
    read_manifest,
    write_manifest,
)
from .query import FilterExpr, QueryError, evaluate, parse_filter, select
from .segmenter import (
    SegmenterConfig,
    SegmenterError,
    SegmentProposal,
    adjust_boundaries,
    normalize_audio,
    slice_audio,
)
from .snr import (
    SilentSegmentError,
    SnrTable,
    SnrTableError,
    build_snr_table,
    estimate_snr,
    gain_invariant_statistic,
    synthesize_mixture,
)
from .speakers import (
    AnchorLabel,
    LocalCluster,
    SpeakerLinkError,
    assign_global_speakers,
    cosine_similarity,
    update_global_centroid,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorLabel",
    "AudioSource",
    "CorpusSummary",
    "FilterExpr",
    "LocalCluster",
    "Manifest",
    "ManifestError",
    "QueryError",
    "SegmentProposal",
    "SegmentRecord",
    "SegmenterConfig",
    "SegmenterError",
    "SilentSegmentError",
    "SnrTable",
    "SnrTableError",
    "SpeakerLinkError",
    "adjust_boundaries",
    "assign_global_speakers",
    "build_snr_table",
    "corpus_summary",
    "cosine_similarity",
    "estimate_snr",
    "evaluate",
    "gain_invariant_statistic",
    "merge_annotations",
    "normalize_audio",
    "parse_filter",
    "read_manifest",
    "select",
    "slice_audio",
    "synthesize_mixture",
    "update_global_centroid",
    "write_manifest",
]
