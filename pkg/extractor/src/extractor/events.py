"""Event-list construction from transcript, frame, and scene-cut metadata.

Two alignments come out of one movie:

* language-aligned: one event per word onset, pairing the word's sentence
  context so far with the closest frame at or after the onset;
* vision-aligned: one event per scene cut, pairing the cut frame with the
  first sentence spoken after the cut.

Events without a pairable counterpart (no later frame, no later sentence)
are dropped and reported. When a word onset sits exactly between two frames
the later frame wins, which the at-or-after rule gives for free.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from brainenc.events import Alignment, EventStructure
from brainenc.formats import write_events_csv

from extractor.errors import JobError


@dataclass(frozen=True)
class TranscriptWord:
    word: str
    onset_ms: float
    sentence_index: int


@dataclass(frozen=True)
class FrameRef:
    image_ref: str
    time_ms: float


def read_transcript_csv(path: str | Path) -> list[TranscriptWord]:
    words = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        required = {"word", "onset_ms", "sentence_index"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise JobError(f"{path}: transcript needs columns {sorted(required)}")
        for row in reader:
            words.append(
                TranscriptWord(
                    word=row["word"],
                    onset_ms=float(row["onset_ms"]),
                    sentence_index=int(row["sentence_index"]),
                )
            )
    if any(b.onset_ms < a.onset_ms for a, b in zip(words, words[1:])):
        raise JobError(f"{path}: word onsets must be non-decreasing")
    return words


def read_frames_csv(path: str | Path) -> list[FrameRef]:
    frames = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        required = {"image_ref", "time_ms"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise JobError(f"{path}: frame index needs columns {sorted(required)}")
        for row in reader:
            frames.append(FrameRef(image_ref=row["image_ref"], time_ms=float(row["time_ms"])))
    frames.sort(key=lambda f: f.time_ms)
    return frames


def _frame_at_or_after(frames: list[FrameRef], t_ms: float) -> FrameRef | None:
    for frame in frames:
        if frame.time_ms >= t_ms:
            return frame
    return None


def _sentences(words: list[TranscriptWord]) -> dict[int, list[TranscriptWord]]:
    by_sentence: dict[int, list[TranscriptWord]] = {}
    for w in words:
        by_sentence.setdefault(w.sentence_index, []).append(w)
    return by_sentence


def build_events(
    words: list[TranscriptWord],
    frames: list[FrameRef],
    cut_times_ms: list[float],
) -> tuple[list[EventStructure], list[EventStructure], dict]:
    """Construct both alignments; returns (language, vision, drop report)."""
    dropped: dict[str, list] = {"language": [], "vision": []}
    sentences = _sentences(words)

    language: list[EventStructure] = []
    for word in sorted(words, key=lambda w: (w.onset_ms, w.sentence_index)):
        frame = _frame_at_or_after(frames, word.onset_ms)
        if frame is None:
            dropped["language"].append(
                {"onset_ms": word.onset_ms, "reason": "no frame after onset"}
            )
            continue
        context = " ".join(
            w.word for w in sentences[word.sentence_index] if w.onset_ms <= word.onset_ms
        )
        language.append(
            EventStructure(
                event_id=len(language),
                onset_ms=word.onset_ms,
                text=context,
                image_ref=frame.image_ref,
                alignment=Alignment.LANGUAGE,
            )
        )

    vision: list[EventStructure] = []
    sentence_onsets = sorted(
        (members[0].onset_ms, idx) for idx, members in sentences.items()
    )
    for cut in sorted(cut_times_ms):
        frame = _frame_at_or_after(frames, cut)
        if frame is None:
            dropped["vision"].append({"onset_ms": cut, "reason": "no frame at cut"})
            continue
        following = next(
            (idx for onset, idx in sentence_onsets if onset >= cut), None
        )
        if following is None:
            dropped["vision"].append(
                {"onset_ms": cut, "reason": "no sentence after cut"}
            )
            continue
        text = " ".join(w.word for w in sentences[following])
        vision.append(
            EventStructure(
                event_id=len(vision),
                onset_ms=cut,
                text=text,
                image_ref=frame.image_ref,
                alignment=Alignment.VISION,
            )
        )
    return language, vision, dropped


def write_event_lists(
    outdir: str | Path,
    language: list[EventStructure],
    vision: list[EventStructure],
    dropped: dict,
    provenance: dict | None = None,
) -> None:
    """Write both event CSVs plus a provenance/drop report."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_events_csv(outdir / "events_language.csv", language)
    write_events_csv(outdir / "events_vision.csv", vision)
    report = {
        "n_language_events": len(language),
        "n_vision_events": len(vision),
        "dropped": dropped,
    }
    if provenance:
        report["provenance"] = provenance
    (outdir / "events_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8"
    )
