"""Command-line surface.

Stages hand off through files in the output directory, so the expensive
bootstrap stage is resumable and any stage can be rerun in isolation:

    synth -> ingest -> regress -> bootstrap -> compare -> tests -> report

`selfcheck` runs the built-in analytic oracles and exits nonzero on any
mismatch. Exit codes: 0 success, 1 usage/config, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

import brainenc
from brainenc.bootstrap import make_resamples, bootstrap_scores, survivor_mask
from brainenc.comparison import ModelSpec
from brainenc.config import SCHEMA, RunConfig, load_config
from brainenc.encoder import make_folds
from brainenc.errors import BrainencError, ConfigurationError, DataError, NumericalError
from brainenc.events import Alignment, validate_dataset
from brainenc.formats import (
    read_ci_csv,
    read_csv,
    read_electrodes_csv,
    read_events_csv,
    read_manifest,
    read_nrsp,
    read_response_csv,
    read_survivors_csv,
    read_verdicts_csv,
    write_ci_csv,
    write_csv,
    write_electrodes_csv,
    write_events_csv,
    write_nrsp,
    write_nscr,
    read_nscr,
    write_scores_csv,
    write_survivors_csv,
    write_verdicts_csv,
)
from brainenc.multimodality import (
    AlignmentBattery,
    TestId,
    TestOutcome,
    aggregate_regions,
    report_text,
    run_all_tests,
)
from brainenc.pipeline import compare_alignment, encode_alignment, load_alignment
from brainenc.regions import load_region_labels
from brainenc.selfcheck import run_selfcheck
from brainenc.synth import generate, write_synth_dataset

STAGES = ("synth", "ingest", "regress", "bootstrap", "compare", "tests", "report", "selfcheck")


def _flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brainenc",
        description="Model-to-brain encoding comparison engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sp = sub.add_parser(stage, help=f"run the {stage} stage")
        sp.add_argument("-c", "--config", default=None, help="YAML config file")
        for key in SCHEMA:
            sp.add_argument(
                _flag_name(key),
                dest=key,
                default=None,
                metavar=key.rsplit(".", 1)[-1].upper(),
                help=f"override config key {key}",
            )
    return parser


def _check_duplicate_flags(argv: list[str]) -> None:
    seen: dict[str, int] = {}
    for pos, token in enumerate(argv):
        if not token.startswith("--"):
            continue
        name = token.split("=", 1)[0]
        if name in seen:
            raise ConfigurationError(
                f"flag {name} given twice (positions {seen[name]} and {pos}); "
                "remove one of the two"
            )
        seen[name] = pos


# ---------------------------------------------------------------------------
# stage helpers

def _alignment_dirs(cfg: RunConfig) -> dict[Alignment, Path]:
    return {a: cfg.output_dir / a.value for a in Alignment}


def _input_paths(cfg: RunConfig, alignment: Alignment) -> dict[str, Path]:
    """Configured input paths, falling back to this run's synth outputs."""
    paths = cfg.alignment_paths(alignment)
    if paths is not None:
        return paths
    synth_dir = cfg.output_dir / "synth" / alignment.value
    if synth_dir.exists():
        return {
            "events": synth_dir / "events.csv",
            "responses": synth_dir / "responses.nrsp",
            "manifest": synth_dir / "manifest.json",
        }
    raise ConfigurationError(
        f"no input paths for {alignment.value}: configure alignments.{alignment.value}.* "
        "or run the synth stage first"
    )


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise ConfigurationError(
            f"missing artifact {path}; run the {produced_by!r} stage first"
        )
    return path


def _load_specs(cfg: RunConfig, alignment: Alignment) -> dict[str, ModelSpec]:
    manifest = _input_paths(cfg, alignment)["manifest"]
    return {e.model_id: e.spec() for e in read_manifest(manifest)}


# ---------------------------------------------------------------------------
# stages

def stage_synth(cfg: RunConfig) -> int:
    data = generate(cfg.synth_config())
    outdir = cfg.output_dir / "synth"
    write_synth_dataset(data, outdir, cfg.config_hash())
    print(f"wrote synthetic dataset to {outdir}")
    return 0


def stage_ingest(cfg: RunConfig) -> int:
    spec = cfg.window_spec()
    for alignment, adir in _alignment_dirs(cfg).items():
        paths = _input_paths(cfg, alignment)
        events = read_events_csv(paths["events"])
        responses_path = paths["responses"]
        if responses_path.suffix == ".csv":
            electrodes_path = cfg.get("electrodes")
            if electrodes_path is None:
                raise ConfigurationError(
                    "CSV responses need an 'electrodes' metadata path in the config"
                )
            electrodes = read_electrodes_csv(Path(str(electrodes_path)))
            responses = read_response_csv(
                responses_path, electrodes, spec.bin_centers_ms()
            )
        else:
            responses, _ = read_nrsp(responses_path)
        report = validate_dataset(events, responses)
        adir.mkdir(parents=True, exist_ok=True)
        (adir / "validation.json").write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", "utf-8"
        )
        if not report.passed:
            summary = "; ".join(v.message for v in report.violations)
            raise DataError(f"{alignment.value} dataset failed validation: {summary}")
        write_events_csv(adir / "events.csv", events, cfg.config_hash())
        write_nrsp(adir / "responses.nrsp", responses, cfg.config_hash())
        write_electrodes_csv(
            adir / "electrodes.csv", list(responses.electrodes), cfg.config_hash()
        )
        print(f"ingested {alignment.value}: {len(events)} events, "
              f"{responses.n_electrodes} electrodes, {responses.n_bins} bins")
    return 0


def stage_regress(cfg: RunConfig) -> int:
    ridge = cfg.ridge_config()
    for alignment, adir in _alignment_dirs(cfg).items():
        _require(adir / "responses.nrsp", "ingest")
        paths = _input_paths(cfg, alignment)
        ds, _ = load_alignment(
            alignment,
            adir / "events.csv",
            adir / "responses.nrsp",
            paths["manifest"],
            epsilon=float(cfg["projection.epsilon"]),
            seed=cfg.seed,
        )
        scores = encode_alignment(ds, ridge, threads=cfg.threads)
        score_dir = adir / "scores"
        score_dir.mkdir(parents=True, exist_ok=True)
        for model_id, ms in scores.models.items():
            write_nscr(score_dir / f"{model_id}.nscr", ms, scores.electrode_ids, cfg.config_hash())
        write_scores_csv(adir / "scores.csv", scores.models, scores.electrode_ids, cfg.config_hash())
        print(f"regressed {alignment.value}: {len(scores.models)} models")
    return 0


def _load_scores(cfg: RunConfig, adir: Path):
    from brainenc.encoder import ScoreTensor

    score_dir = _require(adir / "scores", "regress")
    models = {}
    electrode_ids: list[int] | None = None
    n_bins = 0
    for path in sorted(score_dir.glob("*.nscr")):
        ms, eids, _ = read_nscr(path)
        models[ms.model_id] = ms
        electrode_ids = eids
        n_bins = ms.layers[0].scores.shape[1]
    if not models:
        raise ConfigurationError(f"no NSCR files under {score_dir}; run 'regress' first")
    return ScoreTensor(models=models, electrode_ids=electrode_ids, n_bins=n_bins)


def stage_bootstrap(cfg: RunConfig) -> int:
    ridge = cfg.ridge_config()
    for alignment, adir in _alignment_dirs(cfg).items():
        _require(adir / "responses.nrsp", "ingest")
        paths = _input_paths(cfg, alignment)
        ds, _ = load_alignment(
            alignment,
            adir / "events.csv",
            adir / "responses.nrsp",
            paths["manifest"],
            epsilon=float(cfg["projection.epsilon"]),
            seed=cfg.seed,
        )
        scores = _load_scores(cfg, adir)
        folds = make_folds(ds.responses.n_events, ridge.k_folds)
        resamples = make_resamples(
            ds.responses.n_events,
            int(cfg["bootstrap.n_event_resamples"]),
            cfg.seed,
            ds.onsets(),
            sort=bool(cfg["bootstrap.sort"]),
        )
        ci = bootstrap_scores(
            ds.features, ds.responses, folds, ridge, resamples, scores,
            threads=cfg.threads,
        )
        mask = survivor_mask(ci)
        write_ci_csv(adir / "ci.csv", ci, scores.electrode_ids, cfg.config_hash())
        write_survivors_csv(adir / "survivors.csv", mask, scores.electrode_ids, cfg.config_hash())
        (adir / "resamples.json").write_text(
            json.dumps(
                {
                    "digest": resamples.digest(),
                    "n_resamples": resamples.n_resamples,
                    "failed": list(ci.failed_resamples),
                    "config_hash": cfg.config_hash(),
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            "utf-8",
        )
        print(f"bootstrapped {alignment.value}: B={resamples.n_resamples}, "
              f"{len(ci.failed_resamples)} failed")
    return 0


def _load_battery(cfg: RunConfig, alignment: Alignment, adir: Path) -> AlignmentBattery:
    electrodes = read_electrodes_csv(_require(adir / "electrodes.csv", "ingest"))
    electrode_ids = [e.electrode_id for e in electrodes]
    scores = _load_scores(cfg, adir)
    n_bins = scores.n_bins
    ci = read_ci_csv(_require(adir / "ci.csv", "bootstrap"), electrode_ids, n_bins)
    mask = read_survivors_csv(_require(adir / "survivors.csv", "bootstrap"), electrode_ids, n_bins)
    verdicts_path = adir / "verdicts.csv"
    verdicts = read_verdicts_csv(verdicts_path) if verdicts_path.exists() else []
    return AlignmentBattery(
        alignment=alignment, ci=ci, mask=mask, verdicts=verdicts, electrode_ids=electrode_ids
    )


def stage_compare(cfg: RunConfig) -> int:
    for alignment, adir in _alignment_dirs(cfg).items():
        battery = _load_battery(cfg, alignment, adir)
        verdicts = compare_alignment(
            battery.ci, battery.mask, battery.electrode_ids,
            cfg.comparison_config(), alignment,
        )
        electrodes = read_electrodes_csv(adir / "electrodes.csv")
        write_verdicts_csv(adir / "verdicts.csv", verdicts, electrodes, cfg.config_hash())
        decided = sum(v.winner is not None for v in verdicts)
        print(f"compared {alignment.value}: {decided}/{len(verdicts)} electrodes decided")
    return 0


def stage_tests(cfg: RunConfig) -> int:
    batteries = {}
    specs: dict[str, ModelSpec] = {}
    for alignment, adir in _alignment_dirs(cfg).items():
        _require(adir / "verdicts.csv", "compare")
        batteries[alignment] = _load_battery(cfg, alignment, adir)
        specs.update(_load_specs(cfg, alignment))
    outcomes = run_all_tests(
        batteries[Alignment.LANGUAGE],
        batteries[Alignment.VISION],
        specs,
        cfg.comparison_config(),
        cfg.contrast_pair(),
    )
    tests_dir = cfg.output_dir / "tests"
    tests_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for test_id in TestId:
        for o in outcomes.get(test_id, []):
            rows.append(
                [o.electrode_id, test_id.value, o.pass_language, o.pass_vision, o.pass_combined]
            )
    write_csv(
        tests_dir / "outcomes.csv",
        ["electrode", "test", "pass_language", "pass_vision", "pass_combined"],
        rows,
        cfg.config_hash(),
    )
    for test_id in TestId:
        n = sum(o.pass_combined for o in outcomes.get(test_id, []))
        print(f"{test_id.value}: {n} electrodes pass")
    return 0


def _read_outcomes(path: Path) -> dict[TestId, list[TestOutcome]]:
    header, rows = read_csv(path)
    if header != ["electrode", "test", "pass_language", "pass_vision", "pass_combined"]:
        raise DataError(f"{path}: unexpected outcome columns {header}")
    outcomes: dict[TestId, list[TestOutcome]] = {t: [] for t in TestId}
    for row in rows:
        test_id = TestId(row[1])
        outcomes[test_id].append(
            TestOutcome(
                electrode_id=int(row[0]),
                test_id=test_id,
                pass_language=row[2] == "1",
                pass_vision=row[3] == "1",
                pass_combined=row[4] == "1",
            )
        )
    return outcomes


def stage_report(cfg: RunConfig) -> int:
    outcomes_path = _require(cfg.output_dir / "tests" / "outcomes.csv", "tests")
    outcomes = _read_outcomes(outcomes_path)
    electrodes = read_electrodes_csv(
        _require(cfg.output_dir / Alignment.LANGUAGE.value / "electrodes.csv", "ingest")
    )
    lookup = cfg.get("region_lookup")
    known = load_region_labels(None if lookup is None else Path(str(lookup)))
    rows = aggregate_regions(outcomes, electrodes, known)
    write_csv(
        cfg.output_dir / "region_summary.csv",
        [
            "region", "test", "n_electrodes",
            "n_pass_language", "pct_language",
            "n_pass_vision", "pct_vision",
            "n_pass_both", "has_both_alignments",
        ],
        (
            [
                r.region_label, r.test_id.value, r.n_electrodes,
                r.n_pass_language, r.pct_language,
                r.n_pass_vision, r.pct_vision,
                r.n_pass_both, r.has_both_alignments,
            ]
            for r in rows
        ),
        cfg.config_hash(),
    )
    text = report_text(outcomes, len(electrodes))
    truth_path = cfg.output_dir / "synth" / "ground_truth.csv"
    if truth_path.exists():
        # synthetic run: score the outcomes against the planted ground truth
        from brainenc.synth import GroundTruth, PlantedClass, oracle_recovery_report

        header, rows = read_csv(truth_path)
        truth = GroundTruth(
            planted={int(r[0]): PlantedClass(r[1]) for r in rows}
        )
        recovery = oracle_recovery_report(outcomes, truth)
        write_csv(
            cfg.output_dir / "recovery_report.csv",
            ["planted_class", "test", "n_pass", "n_total", "rate"],
            recovery.rows(),
            cfg.config_hash(),
        )
        text += (
            "\nplanted-signal recovery:\n"
            f"  strict sensitivity (nonlinear sites)  {recovery.strict_sensitivity_nonlinear:.3f}\n"
            f"  nonlinear-integration false positives {recovery.nonlinear_false_positive_rate:.3f}\n"
            f"  linear sites strict-but-not-nonlinear {recovery.linear_strict_not_nonlinear:.3f}\n"
        )
    (cfg.output_dir / "report.txt").write_text(
        f"# config_hash={cfg.config_hash()}\n{text}", "utf-8"
    )
    manifest = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "versions": {
            "brainenc": brainenc.__version__,
            "numpy": np.__version__,
        },
        "config": cfg.values,
    }
    (cfg.output_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    print(text, end="")
    print(f"report written to {cfg.output_dir}")
    return 0


def stage_selfcheck(cfg: RunConfig) -> int:  # cfg unused; signature uniform
    ok = run_selfcheck()
    if not ok:
        raise NumericalError("selfcheck failed")
    return 0


COMMANDS = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "regress": stage_regress,
    "bootstrap": stage_bootstrap,
    "compare": stage_compare,
    "tests": stage_tests,
    "report": stage_report,
    "selfcheck": stage_selfcheck,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _check_duplicate_flags(argv)
        args = parser.parse_args(argv)
        overrides = {key: getattr(args, key) for key in SCHEMA if getattr(args, key) is not None}
        if args.command == "selfcheck" and args.config is None and "seed" not in overrides:
            # selfcheck needs no run configuration
            overrides.setdefault("seed", 0)
            overrides.setdefault("output_dir", ".")
        cfg = load_config(args.config, overrides)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except BrainencError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
