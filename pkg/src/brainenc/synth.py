"""Synthetic datasets with planted integration sites.

Five synthetic "models" share each alignment's events: a language source, a
vision source, a nonlinear multimodal source built from elementwise products
of random language/vision projections (not linearly realizable from the
concatenation), the raw concatenation, and a lossy linear projection of the
concatenation. Electrodes are generated from one of these sources (or pure
noise) with a smooth bin-varying gain, so the full pipeline can be verified
against known ground truth: which electrodes should pass which test.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from brainenc.comparison import ModalityClass, ModelSpec
from brainenc.errors import ConfigurationError
from brainenc.events import (
    Alignment,
    ElectrodeMeta,
    EventStructure,
    ResponseTensor,
)
from brainenc.formats import (
    ManifestEntry,
    write_electrodes_csv,
    write_events_csv,
    write_csv,
    write_manifest,
    write_nfea,
    write_nrsp,
)
from brainenc.multimodality import TestId, TestOutcome
from brainenc.regions import load_region_labels
from brainenc.rng import keyed_rng


class PlantedClass(enum.Enum):
    MULTIMODAL_LINEAR = "multimodal_linear"
    MULTIMODAL_NONLINEAR = "multimodal_nonlinear"
    UNIMODAL_LANGUAGE = "unimodal_language"
    UNIMODAL_VISION = "unimodal_vision"
    NOISE = "noise"


#: Synthetic model ids and their battery roles.
LANG_NET = "lang_net"
VIS_NET = "vis_net"
MM_NET = "mm_net"
CONCAT_NET = "concat_net"
LINPROJ_NET = "linproj_net"

MODEL_SPECS = {
    LANG_NET: ModelSpec(LANG_NET, ModalityClass.UNIMODAL_LANGUAGE, trained=True),
    VIS_NET: ModelSpec(VIS_NET, ModalityClass.UNIMODAL_VISION, trained=True),
    MM_NET: ModelSpec(MM_NET, ModalityClass.MULTIMODAL_TRAINED, trained=True),
    CONCAT_NET: ModelSpec(CONCAT_NET, ModalityClass.LINEAR_INTEGRATION, trained=True),
    LINPROJ_NET: ModelSpec(LINPROJ_NET, ModalityClass.LINEAR_INTEGRATION, trained=True),
}

#: Generating feature source for each planted class (noise has none).
SOURCE_OF_CLASS = {
    PlantedClass.MULTIMODAL_LINEAR: CONCAT_NET,
    PlantedClass.MULTIMODAL_NONLINEAR: MM_NET,
    PlantedClass.UNIMODAL_LANGUAGE: LANG_NET,
    PlantedClass.UNIMODAL_VISION: VIS_NET,
}


@dataclass(frozen=True)
class SynthConfig:
    n_events: int = 1000
    n_multimodal_linear: int = 10
    n_multimodal_nonlinear: int = 10
    n_unimodal_language: int = 10
    n_unimodal_vision: int = 10
    n_noise: int = 10
    dim_language: int = 30
    dim_vision: int = 30
    dim_multimodal: int = 40
    dim_linear_proj: int = 24
    n_bins: int = 20
    noise_sigma: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        counts = (
            self.n_multimodal_linear, self.n_multimodal_nonlinear,
            self.n_unimodal_language, self.n_unimodal_vision, self.n_noise,
        )
        if any(c < 0 for c in counts):
            raise ConfigurationError("electrode counts must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")

    @property
    def n_electrodes(self) -> int:
        return (
            self.n_multimodal_linear + self.n_multimodal_nonlinear
            + self.n_unimodal_language + self.n_unimodal_vision + self.n_noise
        )

    def planted_classes(self) -> list[PlantedClass]:
        out: list[PlantedClass] = []
        out += [PlantedClass.MULTIMODAL_LINEAR] * self.n_multimodal_linear
        out += [PlantedClass.MULTIMODAL_NONLINEAR] * self.n_multimodal_nonlinear
        out += [PlantedClass.UNIMODAL_LANGUAGE] * self.n_unimodal_language
        out += [PlantedClass.UNIMODAL_VISION] * self.n_unimodal_vision
        out += [PlantedClass.NOISE] * self.n_noise
        return out


@dataclass
class GroundTruth:
    planted: dict[int, PlantedClass]  # electrode_id -> class

    def of_class(self, cls: PlantedClass) -> list[int]:
        return sorted(e for e, c in self.planted.items() if c is cls)


@dataclass
class SynthAlignment:
    alignment: Alignment
    events: list[EventStructure]
    features: dict[str, dict[str, np.ndarray]]  # model -> layer -> [n, D]
    responses: ResponseTensor


@dataclass
class SynthData:
    config: SynthConfig
    electrodes: list[ElectrodeMeta]
    specs: dict[str, ModelSpec]
    truth: GroundTruth
    alignments: dict[Alignment, SynthAlignment]


def gain_profile(n_bins: int) -> np.ndarray:
    """Smooth bump over bins so significant-bin runs are contiguous."""
    centers = np.arange(n_bins, dtype=np.float64)
    mid = (n_bins - 1) / 2.0
    width = n_bins / 4.0
    return np.exp(-(((centers - mid) / width) ** 2))


def _make_events(n: int, alignment: Alignment) -> list[EventStructure]:
    return [
        EventStructure(
            event_id=i,
            onset_ms=2000.0 + 1000.0 * i,
            text=f"synthetic utterance {i}",
            image_ref=f"frame_{i:06d}",
            alignment=alignment,
        )
        for i in range(n)
    ]


def _make_sources(cfg: SynthConfig, alignment: Alignment) -> dict[str, np.ndarray]:
    tag = ("synth", cfg.seed, alignment.value)
    n = cfg.n_events
    L = keyed_rng(*tag, "L").standard_normal((n, cfg.dim_language))
    V = keyed_rng(*tag, "V").standard_normal((n, cfg.dim_vision))
    A = keyed_rng(*tag, "A").standard_normal((cfg.dim_language, cfg.dim_multimodal))
    B = keyed_rng(*tag, "B").standard_normal((cfg.dim_vision, cfg.dim_multimodal))
    # Elementwise products of unit-variance projections: zero linear
    # correlation with L and V, so only the multimodal source explains them.
    M = (L @ (A / np.sqrt(cfg.dim_language))) * (V @ (B / np.sqrt(cfg.dim_vision)))
    concat = np.hstack([L, V])
    C = keyed_rng(*tag, "C").standard_normal((concat.shape[1], cfg.dim_linear_proj))
    linproj = concat @ (C / np.sqrt(concat.shape[1]))
    return {LANG_NET: L, VIS_NET: V, MM_NET: M, CONCAT_NET: concat, LINPROJ_NET: linproj}


def _make_electrodes(cfg: SynthConfig) -> list[ElectrodeMeta]:
    regions = sorted(load_region_labels())
    return [
        ElectrodeMeta(
            electrode_id=e,
            subject_id=1,
            region_label=regions[e % len(regions)],
        )
        for e in range(cfg.n_electrodes)
    ]


def generate(config: SynthConfig) -> SynthData:
    """Build both alignment datasets and the planted ground truth."""
    classes = config.planted_classes()
    electrodes = _make_electrodes(config)
    truth = GroundTruth(
        planted={e.electrode_id: cls for e, cls in zip(electrodes, classes)}
    )
    gain = gain_profile(config.n_bins)
    centers = 25.0 * np.arange(config.n_bins, dtype=np.float64)

    alignments = {}
    for alignment in (Alignment.LANGUAGE, Alignment.VISION):
        sources = _make_sources(config, alignment)
        values = np.empty((config.n_electrodes, config.n_events, config.n_bins))
        for e, cls in enumerate(classes):
            noise = keyed_rng(
                "synth", config.seed, alignment.value, "eta", e
            ).standard_normal((config.n_events, config.n_bins))
            if cls is PlantedClass.NOISE:
                values[e] = noise
                continue
            source = sources[SOURCE_OF_CLASS[cls]]
            w = keyed_rng(
                "synth", config.seed, alignment.value, "w", e
            ).standard_normal(source.shape[1])
            signal = source @ w
            signal = signal / signal.std()  # unit variance: SNR = 1 / sigma^2
            values[e] = gain[None, :] * signal[:, None] + config.noise_sigma * noise
        features = {m: {"layer0": F} for m, F in sources.items()}
        alignments[alignment] = SynthAlignment(
            alignment=alignment,
            events=_make_events(config.n_events, alignment),
            features=features,
            responses=ResponseTensor(
                electrodes=tuple(electrodes),
                values=values,
                bin_centers_ms=centers,
                event_ids=tuple(range(config.n_events)),
            ),
        )
    return SynthData(
        config=config,
        electrodes=electrodes,
        specs=dict(MODEL_SPECS),
        truth=truth,
        alignments=alignments,
    )


def write_synth_dataset(data: SynthData, outdir: str | Path, config_hash: str = "") -> None:
    """Write standard-format files so synthetic runs use the real ingest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_electrodes_csv(outdir / "electrodes.csv", data.electrodes, config_hash)
    write_csv(
        outdir / "ground_truth.csv",
        ["electrode_id", "planted_class", "source_model"],
        (
            [e, cls.value, SOURCE_OF_CLASS.get(cls, "")]
            for e, cls in sorted(data.truth.planted.items())
        ),
        config_hash,
    )
    for alignment, ds in data.alignments.items():
        adir = outdir / alignment.value
        (adir / "features").mkdir(parents=True, exist_ok=True)
        write_events_csv(adir / "events.csv", ds.events, config_hash)
        write_nrsp(adir / "responses.nrsp", ds.responses, config_hash)
        entries = []
        for model_id in sorted(ds.features):
            for layer_id, F in ds.features[model_id].items():
                rel = f"features/{model_id}__{layer_id}.nfea"
                write_nfea(
                    adir / rel, F, model_id, layer_id,
                    projected=False, seed=data.config.seed, config_hash=config_hash,
                )
                spec = data.specs[model_id]
                entries.append(
                    ManifestEntry(
                        model_id=model_id,
                        layer_id=layer_id,
                        path=rel,
                        modality_class=spec.modality_class,
                        trained=spec.trained,
                    )
                )
        write_manifest(adir / "manifest.json", entries, config_hash)


@dataclass
class RecoveryReport:
    """Confusion of planted classes against test outcomes."""

    pass_counts: dict[tuple[PlantedClass, TestId], tuple[int, int]]  # (passed, total)
    strict_sensitivity_nonlinear: float
    nonlinear_false_positive_rate: float
    linear_strict_not_nonlinear: float

    def rows(self):
        for (cls, test_id), (passed, total) in sorted(
            self.pass_counts.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
        ):
            rate = passed / total if total else 0.0
            yield [cls.value, test_id.value, passed, total, rate]


def oracle_recovery_report(
    outcomes_by_test: dict[TestId, list[TestOutcome]],
    truth: GroundTruth,
) -> RecoveryReport:
    """Score pipeline outcomes against the planted ground truth.

    Sensitivity: nonlinear-multimodal electrodes passing the strict test.
    False positives: any non-multimodal-nonlinear electrode passing the
    nonlinear integration test. Linear electrodes are additionally expected
    to pass strict while failing nonlinear integration.
    """
    pass_counts: dict[tuple[PlantedClass, TestId], tuple[int, int]] = {}
    outcome_map: dict[TestId, dict[int, TestOutcome]] = {
        test_id: {o.electrode_id: o for o in outcomes}
        for test_id, outcomes in outcomes_by_test.items()
    }
    for cls in PlantedClass:
        members = truth.of_class(cls)
        for test_id, by_electrode in outcome_map.items():
            if not by_electrode:
                continue
            passed = sum(1 for e in members if by_electrode[e].pass_combined)
            pass_counts[(cls, test_id)] = (passed, len(members))

    def rate(cls: PlantedClass, test_id: TestId) -> float:
        passed, total = pass_counts.get((cls, test_id), (0, 0))
        return passed / total if total else 0.0

    nonlinear_members = truth.of_class(PlantedClass.MULTIMODAL_NONLINEAR)
    other = [
        e for cls in (
            PlantedClass.NOISE,
            PlantedClass.UNIMODAL_LANGUAGE,
            PlantedClass.UNIMODAL_VISION,
            PlantedClass.MULTIMODAL_LINEAR,
        )
        for e in truth.of_class(cls)
    ]
    nonlinear_map = outcome_map.get(TestId.NONLINEAR_INTEGRATION, {})
    strict_map = outcome_map.get(TestId.STRICT, {})
    fp = sum(1 for e in other if nonlinear_map and nonlinear_map[e].pass_combined)
    linear_members = truth.of_class(PlantedClass.MULTIMODAL_LINEAR)
    linear_good = sum(
        1
        for e in linear_members
        if strict_map and strict_map[e].pass_combined
        and nonlinear_map and not nonlinear_map[e].pass_combined
    )
    return RecoveryReport(
        pass_counts=pass_counts,
        strict_sensitivity_nonlinear=rate(PlantedClass.MULTIMODAL_NONLINEAR, TestId.STRICT),
        nonlinear_false_positive_rate=fp / len(other) if other else 0.0,
        linear_strict_not_nonlinear=(
            linear_good / len(linear_members) if linear_members else 0.0
        ),
    )
