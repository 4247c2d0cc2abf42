"""Scene-cut acquisition.

Cuts come either from a precomputed file (one cut time in ms per line, or a
CSV with a cut_time_ms column) or from an external detector invoked as a
subprocess. The detector command is a template with {video} and {threshold}
placeholders and must print one cut time in milliseconds per stdout line;
the command and threshold are recorded so downstream provenance can name
exactly how the cuts were produced.
"""

from __future__ import annotations

import csv
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

from extractor.errors import JobError


@dataclass
class SceneCuts:
    times_ms: list[float]
    provenance: dict


def read_cut_times(path: str | Path) -> SceneCuts:
    path = Path(path)
    lines = [
        line.strip()
        for line in path.read_text("utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    if lines and "," in lines[0]:
        reader = csv.DictReader(lines)
        if reader.fieldnames is None or "cut_time_ms" not in reader.fieldnames:
            raise JobError(f"{path}: cut CSV needs a cut_time_ms column")
        times = [float(row["cut_time_ms"]) for row in reader]
    else:
        try:
            times = [float(v) for v in lines]
        except ValueError as exc:
            raise JobError(f"{path}: non-numeric cut time: {exc}") from exc
    return SceneCuts(
        times_ms=sorted(times),
        provenance={"source": "file", "path": str(path)},
    )


def detect_cuts(command_template: str, video: str, threshold: float) -> SceneCuts:
    command = command_template.format(video=shlex.quote(video), threshold=threshold)
    try:
        proc = subprocess.run(
            command, shell=True, capture_output=True, text=True, check=True,
            timeout=3600,
        )
    except subprocess.CalledProcessError as exc:
        raise JobError(
            f"scene-cut detector failed (exit {exc.returncode}): {exc.stderr.strip()}"
        ) from exc
    except subprocess.TimeoutExpired as exc:
        raise JobError("scene-cut detector timed out") from exc
    times = []
    for line in proc.stdout.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            times.append(float(line))
        except ValueError as exc:
            raise JobError(f"detector printed non-numeric line {line!r}") from exc
    return SceneCuts(
        times_ms=sorted(times),
        provenance={
            "source": "detector",
            "command": command_template,
            "threshold": threshold,
            "video": video,
        },
    )
