"""In-memory orchestration of the full analysis.

The CLI drives these stages through files; tests and the synthetic
verification path call them directly. Every stage is deterministic given the
master seed, and thread counts never change results (work units write to
disjoint, index-addressed slots).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from brainenc.bootstrap import (
    BootstrapCI,
    ResampleSet,
    SurvivorMask,
    bootstrap_scores,
    make_resamples,
    survivor_mask,
)
from brainenc.comparison import (
    ComparisonConfig,
    ComparisonVerdict,
    ModelSpec,
    compare_battery,
)
from brainenc.encoder import RidgeConfig, ScoreTensor, make_folds, run_regression
from brainenc.errors import DataError
from brainenc.events import (
    Alignment,
    ElectrodeMeta,
    EventStructure,
    ResponseTensor,
    validate_dataset,
)
from brainenc.features import FeatureMatrix, make_projection_plan, sparse_projection
from brainenc.formats import (
    read_events_csv,
    read_manifest,
    read_nfea,
    read_nrsp,
    read_features_csv,
)
from brainenc.multimodality import (
    AlignmentBattery,
    ContrastPair,
    RegionSummaryRow,
    TestId,
    TestOutcome,
    aggregate_regions,
    report_text,
    run_all_tests,
)
from brainenc.regions import load_region_labels
from brainenc.synth import SynthData


@dataclass
class AlignmentDataset:
    """One alignment's loaded and projected inputs."""

    alignment: Alignment
    events: list[EventStructure]
    features: dict[str, dict[str, np.ndarray]]  # model -> layer -> [n, p]
    responses: ResponseTensor

    def onsets(self) -> np.ndarray:
        return np.array([ev.onset_ms for ev in self.events], dtype=np.float64)


@dataclass
class AlignmentResults:
    """Artifacts of the regression/bootstrap/comparison stages."""

    scores: ScoreTensor
    resamples: ResampleSet
    ci: BootstrapCI
    mask: SurvivorMask
    verdicts: list[ComparisonVerdict]


def project_features(
    raw: dict[str, dict[str, np.ndarray]],
    n_events: int,
    epsilon: float,
    seed: int,
) -> dict[str, dict[str, np.ndarray]]:
    """Apply the JL projection to every layer that exceeds the target dim."""
    projected: dict[str, dict[str, np.ndarray]] = {}
    for model_id, layers in raw.items():
        projected[model_id] = {}
        for layer_id, F in layers.items():
            fm = FeatureMatrix(model_id=model_id, layer_id=layer_id, F=F)
            plan = make_projection_plan(n_events, fm.dim, epsilon, seed)
            projected[model_id][layer_id] = sparse_projection(fm, plan).F
    return projected


def load_alignment(
    alignment: Alignment,
    events_path: str | Path,
    responses_path: str | Path,
    manifest_path: str | Path,
    epsilon: float,
    seed: int,
) -> tuple[AlignmentDataset, dict[str, ModelSpec]]:
    """Load one alignment from its interchange files and project features.

    Feature paths in the manifest resolve relative to the manifest location;
    ``.nfea`` and ``.csv`` feature files are both accepted.
    """
    events = read_events_csv(events_path)
    responses, _ = read_nrsp(responses_path)
    if any(ev.alignment is not alignment for ev in events):
        raise DataError(f"{events_path}: events are not {alignment.value}-aligned")
    report = validate_dataset(events, responses)
    if not report.passed:
        summary = "; ".join(v.message for v in report.violations)
        raise DataError(f"dataset validation failed for {alignment.value}: {summary}")

    entries = read_manifest(manifest_path)
    base = Path(manifest_path).parent
    raw: dict[str, dict[str, np.ndarray]] = {}
    specs: dict[str, ModelSpec] = {}
    for entry in entries:
        fpath = base / entry.path
        if fpath.suffix == ".csv":
            F = read_features_csv(fpath)
        else:
            ff = read_nfea(fpath)
            if (ff.model_id, ff.layer_id) != (entry.model_id, entry.layer_id):
                raise DataError(
                    f"{fpath}: header says {ff.model_id}/{ff.layer_id}, manifest says "
                    f"{entry.model_id}/{entry.layer_id}"
                )
            F = ff.F
        if F.shape[0] != responses.n_events:
            raise DataError(
                f"{fpath}: {F.shape[0]} feature rows vs {responses.n_events} events"
            )
        raw.setdefault(entry.model_id, {})[entry.layer_id] = F
        specs[entry.model_id] = entry.spec()
    features = project_features(raw, responses.n_events, epsilon, seed)
    return (
        AlignmentDataset(
            alignment=alignment, events=events, features=features, responses=responses
        ),
        specs,
    )


def encode_alignment(
    ds: AlignmentDataset, ridge: RidgeConfig, threads: int = 1
) -> ScoreTensor:
    folds = make_folds(ds.responses.n_events, ridge.k_folds)
    models = {
        model_id: run_regression(
            layers, ds.responses, folds, ridge, model_id=model_id, threads=threads
        )
        for model_id, layers in ds.features.items()
    }
    return ScoreTensor(
        models=models,
        electrode_ids=ds.responses.electrode_ids(),
        n_bins=ds.responses.n_bins,
    )


def bootstrap_alignment(
    ds: AlignmentDataset,
    scores: ScoreTensor,
    ridge: RidgeConfig,
    n_resamples: int,
    seed: int,
    sort: bool = True,
    threads: int = 1,
) -> tuple[ResampleSet, BootstrapCI, SurvivorMask]:
    folds = make_folds(ds.responses.n_events, ridge.k_folds)
    resamples = make_resamples(
        ds.responses.n_events, n_resamples, seed, ds.onsets(), sort=sort
    )
    ci = bootstrap_scores(
        ds.features, ds.responses, folds, ridge, resamples, scores, threads=threads
    )
    return resamples, ci, survivor_mask(ci)


def compare_alignment(
    ci: BootstrapCI,
    mask: SurvivorMask,
    electrode_ids: list[int],
    cfg: ComparisonConfig,
    alignment: Alignment,
) -> list[ComparisonVerdict]:
    return compare_battery(
        ci, mask, electrode_ids, cfg, battery_tag=f"full:{alignment.value}"
    )


def run_alignment(
    ds: AlignmentDataset,
    ridge: RidgeConfig,
    cmp_cfg: ComparisonConfig,
    n_event_resamples: int,
    sort_resamples: bool = True,
    threads: int = 1,
) -> AlignmentResults:
    """Regression, bootstrap, and full-battery comparison for one alignment."""
    scores = encode_alignment(ds, ridge, threads)
    resamples, ci, mask = bootstrap_alignment(
        ds, scores, ridge, n_event_resamples, cmp_cfg.seed,
        sort=sort_resamples, threads=threads,
    )
    verdicts = compare_alignment(
        ci, mask, ds.responses.electrode_ids(), cmp_cfg, ds.alignment
    )
    return AlignmentResults(
        scores=scores, resamples=resamples, ci=ci, mask=mask, verdicts=verdicts
    )


def run_multimodality_tests(
    results: dict[Alignment, AlignmentResults],
    electrodes: list[ElectrodeMeta],
    specs: dict[str, ModelSpec],
    cmp_cfg: ComparisonConfig,
    pair: ContrastPair | None = None,
    region_lookup: str | Path | None = None,
) -> tuple[dict[TestId, list[TestOutcome]], list[RegionSummaryRow], str]:
    """Five-test battery over both alignments plus the region aggregation."""
    electrode_ids = [e.electrode_id for e in electrodes]
    batteries = {
        alignment: AlignmentBattery(
            alignment=alignment,
            ci=res.ci,
            mask=res.mask,
            verdicts=res.verdicts,
            electrode_ids=electrode_ids,
        )
        for alignment, res in results.items()
    }
    outcomes = run_all_tests(
        batteries[Alignment.LANGUAGE], batteries[Alignment.VISION], specs, cmp_cfg, pair
    )
    regions = aggregate_regions(outcomes, electrodes, load_region_labels(region_lookup))
    text = report_text(outcomes, len(electrodes))
    return outcomes, regions, text


def run_synth_pipeline(
    data: SynthData,
    ridge: RidgeConfig,
    cmp_cfg: ComparisonConfig,
    n_event_resamples: int,
    pair: ContrastPair | None = None,
    threads: int = 1,
) -> tuple[dict[Alignment, AlignmentResults], dict[TestId, list[TestOutcome]]]:
    """End-to-end run on an in-memory synthetic dataset."""
    results = {}
    for alignment, synth_alignment in data.alignments.items():
        ds = AlignmentDataset(
            alignment=alignment,
            events=synth_alignment.events,
            features=synth_alignment.features,
            responses=synth_alignment.responses,
        )
        results[alignment] = run_alignment(
            ds, ridge, cmp_cfg, n_event_resamples, threads=threads
        )
    outcomes, _, _ = run_multimodality_tests(
        results, data.electrodes, data.specs, cmp_cfg, pair
    )
    return results, outcomes
