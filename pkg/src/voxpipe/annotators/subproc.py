"""Out-of-process adapter: JSON lines in, JSON lines out.

Heavyweight models run in their own process (own environment, own GPU
stack). The parent writes one object per segment to the child's stdin:

    {"segment_id": ..., "audio_path": ..., "start_s": ..., "end_s": ...}

and reads one object per segment back:

    {"segment_id": ..., "fields": {...}, "status": "done"}
    {"segment_id": ..., "status": "failed", "reason": "..."}

A non-zero child exit fails the whole batch.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from typing import Sequence

from .base import AnnotationBatchResult, AnnotatorError, SegmentInput


@dataclass
class SubprocessAnnotator:
    argv: list[str]
    timeout_s: float | None = 600.0
    name: str = field(default="subprocess", repr=False)

    def annotate_batch(self, batch: Sequence[SegmentInput]) -> AnnotationBatchResult:
        payload = "".join(
            json.dumps(
                {
                    "segment_id": item.segment_id,
                    "audio_path": item.audio_path,
                    "start_s": item.start_s,
                    "end_s": item.end_s,
                },
                sort_keys=True,
            )
            + "\n"
            for item in batch
        )
        try:
            proc = subprocess.run(
                self.argv,
                input=payload,
                capture_output=True,
                text=True,
                timeout=self.timeout_s,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise AnnotatorError(f"{self.name}: adapter process failed: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1:] or ["<no stderr>"]
            raise AnnotatorError(
                f"{self.name}: adapter exited with {proc.returncode}: {tail[0]}"
            )
        result = AnnotationBatchResult()
        for lineno, line in enumerate(proc.stdout.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                sid = str(row["segment_id"])
                status = row.get("status", "done")
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise AnnotatorError(
                    f"{self.name}: malformed adapter output at line {lineno}: {exc}"
                ) from exc
            if sid in result.fields or sid in result.failures:
                raise AnnotatorError(f"{self.name}: duplicate output for segment {sid!r}")
            if status == "done":
                result.fields[sid] = dict(row.get("fields", {}))
            elif status == "failed":
                result.failures[sid] = str(row.get("reason", "adapter reported failure"))
            else:
                raise AnnotatorError(f"{self.name}: unknown status {status!r} for {sid!r}")
        return result
