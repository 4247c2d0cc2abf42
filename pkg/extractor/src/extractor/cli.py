"""Extractor command line.

    brainenc-extract build-events --transcript t.csv --frames f.csv \
        (--cuts cuts.txt | --detector-cmd 'detect {video} {threshold}' \
         --video movie.mp4 --threshold 27.0) --outdir events/

    brainenc-extract extract --model toy_cross_attention --events ev.csv \
        --outdir features/ --seed 7 [--random-init] [--frames-dir dir] \
        [--weights w.pt] [--layers q,k,v] [--model-id name]

    brainenc-extract list-layers --model toy_text_unimodal --seed 7
"""

from __future__ import annotations

import argparse
import sys

from extractor.adapters import REGISTRY, get_adapter
from extractor.errors import ExtractionError
from extractor.events import build_events, read_frames_csv, read_transcript_csv, write_event_lists
from extractor.frames import DirectoryFrameSource, SyntheticFrameSource
from extractor.jobs import ExtractionJob, extract
from extractor.layers import enumerate_layers
from extractor.scenecut import detect_cuts, read_cut_times


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brainenc-extract")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("build-events", help="build both event-list alignments")
    ev.add_argument("--transcript", required=True, help="CSV: word,onset_ms,sentence_index")
    ev.add_argument("--frames", required=True, help="CSV: image_ref,time_ms")
    ev.add_argument("--cuts", help="precomputed cut times (txt or CSV)")
    ev.add_argument("--detector-cmd", help="detector command with {video} and {threshold}")
    ev.add_argument("--video", help="video path for the detector")
    ev.add_argument("--threshold", type=float, default=27.0)
    ev.add_argument("--outdir", required=True)

    ex = sub.add_parser("extract", help="extract layerwise features to NFEA files")
    ex.add_argument("--model", required=True, choices=sorted(REGISTRY))
    ex.add_argument("--events", required=True, help="event CSV from build-events")
    ex.add_argument("--outdir", required=True)
    ex.add_argument("--seed", type=int, required=True)
    ex.add_argument("--random-init", action="store_true",
                    help="random weights; contrastive models are relabeled unimodal")
    ex.add_argument("--weights", default=None, help="state-dict file for trained weights")
    ex.add_argument("--frames-dir", default=None,
                    help="directory of <image_ref>.npy frames; synthetic frames if omitted")
    ex.add_argument("--layers", default=None, help="comma-separated layer ids to keep")
    ex.add_argument("--model-id", default=None, help="manifest model id override")

    ls = sub.add_parser("list-layers", help="enumerate a model's tensor-producing layers")
    ls.add_argument("--model", required=True, choices=sorted(REGISTRY))
    ls.add_argument("--seed", type=int, default=0)
    return parser


def cmd_build_events(args) -> int:
    words = read_transcript_csv(args.transcript)
    frames = read_frames_csv(args.frames)
    if args.cuts:
        cuts = read_cut_times(args.cuts)
    elif args.detector_cmd and args.video:
        cuts = detect_cuts(args.detector_cmd, args.video, args.threshold)
    else:
        print("need either --cuts or --detector-cmd with --video", file=sys.stderr)
        return 1
    language, vision, dropped = build_events(words, frames, cuts.times_ms)
    write_event_lists(args.outdir, language, vision, dropped, provenance=cuts.provenance)
    print(
        f"wrote {len(language)} language-aligned and {len(vision)} vision-aligned "
        f"events to {args.outdir} "
        f"(dropped {len(dropped['language'])}/{len(dropped['vision'])})"
    )
    return 0


def cmd_extract(args) -> int:
    job = ExtractionJob(
        model_key=args.model,
        trained=not args.random_init,
        events_path=args.events,
        output_dir=args.outdir,
        seed=args.seed,
        weights_path=args.weights,
        layer_filter=args.layers.split(",") if args.layers else None,
        model_id=args.model_id,
    )
    frames = (
        DirectoryFrameSource(args.frames_dir)
        if args.frames_dir
        else SyntheticFrameSource()
    )
    result = extract(job, frames)
    print(
        f"{result.model_id}: {len(result.layer_ids)} layers x {result.n_events} events "
        f"-> {result.manifest_path} ({len(result.skipped)} skipped, "
        f"{result.truncated} texts truncated)"
    )
    return 0


def cmd_list_layers(args) -> int:
    adapter = get_adapter(args.model)
    model = adapter.build(args.seed)
    for layer in enumerate_layers(model, adapter.probe_inputs()):
        print(f"{layer.layer_id}\t{layer.shape}\tflat={layer.flat_dim}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "build-events":
            return cmd_build_events(args)
        if args.command == "extract":
            return cmd_extract(args)
        return cmd_list_layers(args)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
