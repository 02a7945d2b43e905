from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from voxpipe.annotators import (
    build_stub_registry,
    discover_sources,
    load_pipeline_config,
    run_pipeline,
)
from voxpipe.fixtures import DEMO_LAYOUT, make_demo_corpus
from voxpipe.snr import SnrTable, build_snr_table
from voxpipe.speakers import AnchorLabel, write_anchor_file

PIPELINE_SEED = 7


@pytest.fixture(scope="session")
def snr_table():
    """Full default calibration table; built once per session (~5 s)."""
    return build_snr_table()


@pytest.fixture(scope="session")
def snr_table_file(snr_table, tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("snr") / "table.json"
    snr_table.save(path)
    return path


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory) -> Path:
    """The bundled 60 s episode, synthesized deterministically."""
    directory = tmp_path_factory.mktemp("audio")
    make_demo_corpus(directory)
    return directory


@pytest.fixture(scope="session")
def demo_layout():
    return DEMO_LAYOUT


@pytest.fixture(scope="session")
def anchors_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("anchors") / "anchors.jsonl"
    write_anchor_file(path, [AnchorLabel("demo", "demo_0000", "spk_demo_a")])
    return path


@pytest.fixture(scope="session")
def pipeline_config_file(tmp_path_factory, snr_table_file, anchors_file) -> Path:
    out_dir = tmp_path_factory.mktemp("runs")
    config = {
        "output_manifest": str(out_dir / "manifest.jsonl"),
        "seed": PIPELINE_SEED,
        "snr_table_path": str(snr_table_file),
        "anchors_path": str(anchors_file),
        "link_threshold": 0.7,
    }
    path = out_dir / "pipeline.json"
    path.write_text(json.dumps(config, indent=1))
    return path


@pytest.fixture(scope="session")
def fixture_manifest(pipeline_config_file, demo_dir):
    """One full library-level pipeline run over the demo episode."""
    config = load_pipeline_config(pipeline_config_file)
    table_registry = build_stub_registry(
        SnrTable.load(config.snr_table_path), seed=config.seed
    )
    sources, skipped = discover_sources(demo_dir)
    assert not skipped
    manifest, report = run_pipeline(sources, config, table_registry)
    assert not report.has_failures
    return manifest
