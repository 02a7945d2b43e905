"""Annotator adapter contract, deterministic stubs, and batch orchestration."""

from .base import (
    ANNOTATOR_NAMES,
    AnnotationBatchResult,
    AnnotatorError,
    AnnotatorRegistry,
    AnnotatorSpec,
    SegmentInput,
)
from .pipeline import (
    AudioAccess,
    PipelineConfig,
    PipelineError,
    RunReport,
    discover_sources,
    link_speakers,
    load_or_build_snr_table,
    load_pipeline_config,
    run_annotator,
    run_pipeline,
)
from .stubs import build_stub_registry, sound_event_taxonomy
from .subproc import SubprocessAnnotator

__all__ = [
    "ANNOTATOR_NAMES",
    "AnnotationBatchResult",
    "AnnotatorError",
    "AnnotatorRegistry",
    "AnnotatorSpec",
    "AudioAccess",
    "PipelineConfig",
    "PipelineError",
    "RunReport",
    "SegmentInput",
    "SubprocessAnnotator",
    "build_stub_registry",
    "discover_sources",
    "link_speakers",
    "load_or_build_snr_table",
    "load_pipeline_config",
    "run_annotator",
    "run_pipeline",
    "sound_event_taxonomy",
]
