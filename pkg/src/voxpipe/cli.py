"""Command-line entry point.

Commands: run, filter, stats, snr, eval (wer|cer|sv), snr-table.
Machine-readable results go to stdout, diagnostics to stderr.
Exit codes: 0 success, 1 fatal error or bad arguments, 2 partial
annotation failure (some segments or sources failed but a manifest
was still produced).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import audio as audio_io
from .annotators import (
    build_stub_registry,
    discover_sources,
    load_or_build_snr_table,
    load_pipeline_config,
    run_pipeline,
)
from .manifest import corpus_summary, read_manifest, write_manifest
from .metrics import (
    TrialScore,
    cer_corpus,
    eer_threshold,
    sv_acceptance,
    wer_corpus,
)
from .query import parse_filter, select
from .segmenter import SegmenterConfig, normalize_audio
from .snr import DEFAULT_GRID_DB, SnrTable, build_snr_table, estimate_snr
from .stats import (
    DEFAULT_ATTRIBUTE_EDGES,
    DEFAULT_SNR_EDGES,
    StatsReport,
    category_counts,
    emit_report,
    histogram,
    histogram_csv,
)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


class CliError(Exception):
    """Fatal command error carrying the message for stderr."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse contract
        raise CliError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="voxpipe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the annotation pipeline over an audio directory")
    run.add_argument("--config", required=True, help="pipeline config JSON")
    run.add_argument("--audio-dir", required=True, help="directory of .wav sources")
    run.add_argument("--out", help="override the config's output manifest path")
    run.add_argument("--workers", type=int, help="cap on parallel source decoding")

    flt = sub.add_parser("filter", help="select manifest records matching a query")
    flt.add_argument("--manifest", required=True)
    flt.add_argument("--query", required=True)
    flt.add_argument("--out", required=True)

    stats = sub.add_parser("stats", help="histograms, category counts, corpus summary")
    stats.add_argument("mode", nargs="?", default="hist", choices=("hist", "summary"))
    stats.add_argument("--manifest", required=True)
    stats.add_argument("--field", help="numeric field for hist mode (e.g. snr_db)")
    stats.add_argument("--bins", help="edges lo:hi:width or comma-separated list")
    stats.add_argument("--out", help="write the report to a file instead of stdout")
    stats.add_argument(
        "--format",
        default="delimited-table",
        choices=("structured-text", "delimited-table", "plot-image"),
    )

    snr = sub.add_parser("snr", help="estimate SNR of a wave file")
    snr.add_argument("wavfile")
    snr.add_argument("--table", help="calibration table path (built on the fly if omitted)")

    table = sub.add_parser("snr-table", help="build and save a calibration table")
    table.add_argument("action", choices=("build",))
    table.add_argument("--out", required=True)
    table.add_argument("--trials", type=int, default=32)
    table.add_argument("--samples", type=int, default=16000)
    table.add_argument("--seed", type=int, default=1422)
    table.add_argument("--grid-min", type=float, default=DEFAULT_GRID_DB[0])
    table.add_argument("--grid-max", type=float, default=DEFAULT_GRID_DB[-1])
    table.add_argument("--grid-step", type=float, default=1.0)

    ev = sub.add_parser("eval", help="objective metrics: wer | cer | sv")
    ev_sub = ev.add_subparsers(dest="metric", required=True)
    for metric in ("wer", "cer"):
        m = ev_sub.add_parser(metric)
        m.add_argument("--ref", required=True, help="reference transcript file, one per line")
        m.add_argument("--hyp", required=True, help="hypothesis transcript file, line-aligned")
    sv = ev_sub.add_parser("sv")
    sv.add_argument("--trials", required=True, help="TSV: 'kind\\tscore' rows (calibration) or one score per row")
    sv.add_argument("--calibrate", action="store_true", help="compute EER threshold from labeled trials")
    sv.add_argument("--threshold", type=float, help="acceptance threshold (non-calibration mode)")
    return parser


def _parse_bins(spec: str | None, field: str) -> list[float]:
    if spec is None:
        if field == "snr_db":
            return list(DEFAULT_SNR_EDGES)
        if field in ("arousal", "dominance", "valence"):
            return list(DEFAULT_ATTRIBUTE_EDGES)
        raise CliError(f"--bins required for field {field!r}")
    if ":" in spec:
        try:
            lo, hi, width = (float(part) for part in spec.split(":"))
        except ValueError as exc:
            raise CliError(f"bad --bins {spec!r}: expected lo:hi:width") from exc
        if width <= 0 or hi <= lo:
            raise CliError(f"bad --bins {spec!r}: need hi > lo and width > 0")
        edges = []
        value = lo
        while value < hi + width / 2:
            edges.append(round(value, 10))
            value += width
        return edges
    try:
        return [float(part) for part in spec.split(",")]
    except ValueError as exc:
        raise CliError(f"bad --bins {spec!r}") from exc


def _read_lines(path: str) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_pipeline_config(args.config)
    if args.out:
        config.output_manifest = args.out
    if args.workers is not None:
        config.workers = args.workers
    table = load_or_build_snr_table(config)
    registry = build_stub_registry(
        table,
        seed=config.seed,
        seeds={a.name: a.seed for a in config.annotators if a.seed is not None},
        batch_sizes={a.name: a.batch_size for a in config.annotators if a.batch_size is not None},
    )
    sources, unreadable = discover_sources(args.audio_dir)
    manifest, report = run_pipeline(sources, config, registry)
    report.skipped_sources = unreadable + report.skipped_sources
    write_manifest(manifest, config.output_manifest)
    print(json.dumps(report.to_dict(), sort_keys=True))
    print(f"manifest written to {config.output_manifest}", file=sys.stderr)
    return EXIT_PARTIAL if report.has_failures else EXIT_OK


def _cmd_filter(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.manifest)
    expr = parse_filter(args.query)
    subset = select(manifest, expr)
    write_manifest(subset, args.out)
    print(f"{len(subset.records)} of {len(manifest.records)} records selected", file=sys.stderr)
    return EXIT_OK


def _cmd_stats(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.manifest)
    if args.mode == "summary":
        payload = json.dumps(corpus_summary(manifest).to_dict(), sort_keys=True)
        if args.out:
            Path(args.out).write_text(payload + "\n", encoding="utf-8")
        else:
            print(payload)
        return EXIT_OK
    if not args.field:
        raise CliError("stats hist mode requires --field")
    if args.field in ("emotion_category", "gender"):
        counts = category_counts(manifest, args.field)
        payload = json.dumps(counts.to_dict(), sort_keys=True)
        if args.out:
            Path(args.out).write_text(payload + "\n", encoding="utf-8")
        else:
            print(payload)
        return EXIT_OK
    hist = histogram(manifest, args.field, _parse_bins(args.bins, args.field))
    report = StatsReport(histograms=[hist])
    if args.out:
        emit_report(report, args.out, args.format)
        print(f"report written to {args.out}", file=sys.stderr)
    else:
        if args.format == "plot-image":
            raise CliError("plot-image output requires --out")
        if args.format == "structured-text":
            print(json.dumps(report.to_dict(), sort_keys=True))
        else:
            sys.stdout.write(histogram_csv(hist))
    print(
        f"{sum(hist.counts)} in range, {hist.below} below, {hist.above} above, "
        f"{hist.absent} without {args.field}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_snr(args: argparse.Namespace) -> int:
    if args.table:
        table = SnrTable.load(args.table)
    else:
        print("no --table given; building the default calibration table", file=sys.stderr)
        table = build_snr_table()
    waveform, rate = audio_io.read_wav(args.wavfile)
    waveform = normalize_audio(waveform, rate, SegmenterConfig(target_sample_rate_hz=min(rate, 16000)))
    print(f"{estimate_snr(waveform, table):.2f}")
    return EXIT_OK


def _cmd_snr_table(args: argparse.Namespace) -> int:
    step = args.grid_step
    count = int(round((args.grid_max - args.grid_min) / step))
    grid = [args.grid_min + i * step for i in range(count + 1)]
    table = build_snr_table(
        snr_grid_db=grid,
        trials_per_point=args.trials,
        samples_per_trial=args.samples,
        seed=args.seed,
    )
    table.save(args.out)
    print(f"table with {len(grid)} points written to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    if args.metric in ("wer", "cer"):
        refs = _read_lines(args.ref)
        hyps = _read_lines(args.hyp)
        rate = wer_corpus(refs, hyps) if args.metric == "wer" else cer_corpus(refs, hyps)
        print(f"{rate}")
        return EXIT_OK
    rows = [line for line in _read_lines(args.trials) if line.strip()]
    if args.calibrate:
        trials = []
        for lineno, line in enumerate(rows, start=1):
            parts = line.split("\t")
            if len(parts) != 2:
                raise CliError(f"{args.trials}:{lineno}: expected 'kind<TAB>score'")
            trials.append(TrialScore(parts[0].strip(), float(parts[1])))
        threshold, eer = eer_threshold(trials)
        print(f"{threshold}\t{eer}")
        return EXIT_OK
    if args.threshold is None:
        raise CliError("eval sv needs --calibrate or --threshold")
    similarities = [float(line.split("\t")[-1]) for line in rows]
    print(f"{sv_acceptance(similarities, args.threshold)}")
    return EXIT_OK


_HANDLERS = {
    "run": _cmd_run,
    "filter": _cmd_filter,
    "stats": _cmd_stats,
    "snr": _cmd_snr,
    "snr-table": _cmd_snr_table,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FATAL
    except (ValueError, OSError) as exc:
        print(f"voxpipe: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
