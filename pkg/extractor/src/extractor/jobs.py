"""Extraction jobs: events in, NFEA files and a manifest out.

Each event is run through the wrapped model one at a time (batching would
not change results but batch-size-one keeps the reproducibility argument
trivial); every tensor-producing layer contributes one flattened row per
event. Events with missing assets are skipped and recorded; a job fails once
skips exceed 5%.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from brainenc.events import EventStructure
from brainenc.formats import (
    ManifestEntry,
    read_events_csv,
    read_manifest,
    write_manifest,
    write_nfea,
)

from extractor.adapters import EventAssets, MissingAsset, ModelAdapter, Modality, get_adapter
from extractor.errors import JobError
from extractor.frames import FrameSource
from extractor.layers import ActivationCapture

MAX_SKIP_FRACTION = 0.05


@dataclass
class ExtractionJob:
    model_key: str
    trained: bool
    events_path: str | Path
    output_dir: str | Path
    seed: int
    weights_path: str | None = None
    layer_filter: list[str] | None = None
    model_id: str | None = None  # defaults to the registry key


@dataclass
class ExtractionResult:
    model_id: str
    layer_ids: list[str]
    layer_shapes: dict[str, tuple[int, ...]]
    n_events: int
    skipped: list[tuple[int, str]]
    truncated: int
    manifest_path: Path
    feature_paths: dict[str, Path] = field(default_factory=dict)


def _rows_for_events(
    adapter: ModelAdapter,
    model: torch.nn.Module,
    events: list[EventStructure],
    frames: FrameSource,
) -> tuple[dict[str, list[np.ndarray]], list[tuple[int, str]], int, dict[str, tuple[int, ...]], list[str]]:
    rows: dict[str, list[np.ndarray]] = {}
    skipped: list[tuple[int, str]] = []
    truncated = 0
    order: list[str] = []
    shapes: dict[str, tuple[int, ...]] = {}
    needs_image = adapter.info.modality in (Modality.IMAGE, Modality.IMAGE_TEXT)
    with ActivationCapture(model) as capture, torch.no_grad():
        for event in events:
            image = frames.get(event.image_ref) if needs_image else None
            assets = EventAssets(text=event.text, image=image)
            try:
                kwargs, was_truncated = adapter.inputs(assets)
            except MissingAsset as exc:
                skipped.append((event.event_id, exc.reason))
                continue
            truncated += int(was_truncated)
            capture.reset_call_counts()
            model(**kwargs)
            if not order:
                order = list(capture.order)
                shapes = dict(capture.shapes)
                rows = {layer_id: [] for layer_id in order}
            elif list(capture.activations.keys()) != order:
                raise JobError(
                    f"layer set changed between events (event {event.event_id})"
                )
            for layer_id in order:
                rows[layer_id].append(
                    capture.activations[layer_id].numpy().astype(np.float32).copy()
                )
    return rows, skipped, truncated, shapes, order


def extract(job: ExtractionJob, frames: FrameSource) -> ExtractionResult:
    adapter = get_adapter(job.model_key)
    model_id = job.model_id or adapter.info.model_id
    model = adapter.build(job.seed, job.weights_path)
    events = read_events_csv(job.events_path)
    if not events:
        raise JobError("event list is empty")

    rows, skipped, truncated, shapes, order = _rows_for_events(
        adapter, model, events, frames
    )
    if len(skipped) > MAX_SKIP_FRACTION * len(events):
        raise JobError(
            f"{len(skipped)} of {len(events)} events skipped (> {MAX_SKIP_FRACTION:.0%}): "
            f"first reasons {skipped[:5]}"
        )
    if not rows:
        raise JobError("no events survived asset lookup")

    if job.layer_filter is not None:
        keep = [layer_id for layer_id in order if layer_id in set(job.layer_filter)]
        missing = set(job.layer_filter) - set(order)
        if missing:
            raise JobError(f"layer filter names unknown layers: {sorted(missing)}")
        order = keep

    outdir = Path(job.output_dir)
    (outdir / "features").mkdir(parents=True, exist_ok=True)
    effective = adapter.effective_class(job.trained)
    entries = []
    feature_paths: dict[str, Path] = {}
    for layer_id in order:
        F = np.stack(rows[layer_id])
        rel = f"features/{model_id}__{layer_id.replace('/', '_')}.nfea"
        write_nfea(outdir / rel, F, model_id, layer_id, projected=False, seed=job.seed)
        feature_paths[layer_id] = outdir / rel
        entries.append(
            ManifestEntry(
                model_id=model_id,
                layer_id=layer_id,
                path=rel,
                modality_class=effective,
                trained=job.trained,
            )
        )
    # One manifest per output directory: jobs for different models merge into
    # it, and re-running a job replaces only its own entries.
    manifest_path = outdir / "manifest.json"
    if manifest_path.exists():
        existing = [e for e in read_manifest(manifest_path) if e.model_id != model_id]
        entries = existing + entries
    write_manifest(manifest_path, entries)
    report = {
        "model_id": model_id,
        "model_key": job.model_key,
        "trained": job.trained,
        "modality_class": effective.value,
        "seed": job.seed,
        "n_events": len(events),
        "n_rows": len(events) - len(skipped),
        "skipped": [{"event_id": e, "reason": r} for e, r in skipped],
        "truncated_texts": truncated,
        "layers": {layer_id: list(shapes[layer_id]) for layer_id in order},
    }
    (outdir / f"{model_id}__report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    return ExtractionResult(
        model_id=model_id,
        layer_ids=order,
        layer_shapes={layer_id: shapes[layer_id] for layer_id in order},
        n_events=len(events) - len(skipped),
        skipped=skipped,
        truncated=truncated,
        manifest_path=manifest_path,
        feature_paths=feature_paths,
    )
