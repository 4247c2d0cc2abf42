"""The five multimodality tests and DKT region aggregation.

Tests escalate in stringency: a weak pass needs a significant win (or default
win) by a multimodal or linearly-integrated model in one alignment; the
strict variants need it in both alignments; the architecture-controlled
contrast pits a configured multimodal/unimodal twin pair against each other;
the integration test asks whether, at strictly multimodal electrodes, a
genuinely multimodal model also beats every linear-integration baseline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from brainenc.bootstrap import BootstrapCI, SurvivorMask
from brainenc.comparison import (
    INTEGRATION_CLASSES,
    MULTIMODAL_CLASSES,
    ComparisonConfig,
    ComparisonVerdict,
    ModalityClass,
    ModelSpec,
    VerdictKind,
    apply_battery_fdr,
    compare_at_electrode,
)
from brainenc.errors import ConfigurationError, DataError
from brainenc.events import Alignment, ElectrodeMeta
from brainenc.regions import is_known_region


class TestId(enum.Enum):
    __test__ = False  # a domain enum, not a pytest class

    WEAK = "weak"
    WEAK_SLIP = "weak_slip"
    STRICT = "strict"
    STRICT_SLIP = "strict_slip"
    NONLINEAR_INTEGRATION = "nonlinear_integration"


@dataclass
class TestOutcome:
    __test__ = False  # a domain type, not a pytest class

    electrode_id: int
    test_id: TestId
    pass_language: bool
    pass_vision: bool
    pass_combined: bool
    detail: dict[str, str] = field(default_factory=dict)


@dataclass
class AlignmentBattery:
    """One alignment's comparison artifacts, as the tests consume them."""

    alignment: Alignment
    ci: BootstrapCI
    mask: SurvivorMask
    verdicts: list[ComparisonVerdict]
    electrode_ids: list[int]

    def verdict_of(self, electrode_id: int) -> ComparisonVerdict:
        return self._by_electrode()[electrode_id]

    def _by_electrode(self) -> dict[int, ComparisonVerdict]:
        if not hasattr(self, "_verdict_map"):
            self._verdict_map = {v.electrode_id: v for v in self.verdicts}
        return self._verdict_map


@dataclass(frozen=True)
class ContrastPair:
    """Architecture/dataset-controlled twins: one multimodal, one unimodal."""

    multimodal_id: str
    unimodal_id: str


def _decided(verdict: ComparisonVerdict) -> bool:
    return verdict.kind in (VerdictKind.DEFAULT_WINNER, VerdictKind.BOOTSTRAP_WIN)


def _winner_class(
    verdict: ComparisonVerdict, specs: dict[str, ModelSpec]
) -> ModalityClass | None:
    if not _decided(verdict) or verdict.winner is None:
        return None
    return specs[verdict.winner].modality_class


def weak_test(
    language: AlignmentBattery,
    vision: AlignmentBattery,
    specs: dict[str, ModelSpec],
) -> list[TestOutcome]:
    """Pass: any multimodal or linear-integration model wins in an alignment."""
    outcomes = []
    for electrode_id in language.electrode_ids:
        passes = {}
        detail = {}
        for battery in (language, vision):
            verdict = battery.verdict_of(electrode_id)
            cls = _winner_class(verdict, specs)
            passes[battery.alignment] = cls in INTEGRATION_CLASSES if cls else False
            detail[f"{battery.alignment.value}_winner"] = verdict.winner or ""
        outcomes.append(
            TestOutcome(
                electrode_id=electrode_id,
                test_id=TestId.WEAK,
                pass_language=passes[Alignment.LANGUAGE],
                pass_vision=passes[Alignment.VISION],
                pass_combined=passes[Alignment.LANGUAGE] or passes[Alignment.VISION],
                detail=detail,
            )
        )
    return outcomes


def strict_test(weak_outcomes: list[TestOutcome]) -> list[TestOutcome]:
    """Pass: the weak test passes in both alignments."""
    return [
        TestOutcome(
            electrode_id=o.electrode_id,
            test_id=TestId.STRICT,
            pass_language=o.pass_language,
            pass_vision=o.pass_vision,
            pass_combined=o.pass_language and o.pass_vision,
            detail=dict(o.detail),
        )
        for o in weak_outcomes
    ]


def slip_tests(
    language: AlignmentBattery,
    vision: AlignmentBattery,
    specs: dict[str, ModelSpec],
    pair: ContrastPair | None,
    cfg: ComparisonConfig,
) -> tuple[list[TestOutcome], list[TestOutcome], dict[Alignment, list[ComparisonVerdict]]]:
    """Two-model battery between the configured contrast pair.

    Returns (weak-pair outcomes, strict-pair outcomes, raw pair verdicts per
    alignment). The pair's FDR family is all electrodes within one alignment.
    """
    if pair is None:
        raise ConfigurationError("no contrast pair configured for the paired tests")
    for member in (pair.multimodal_id, pair.unimodal_id):
        if member not in specs:
            raise ConfigurationError(f"contrast pair member {member!r} not in the battery")
    if specs[pair.multimodal_id].modality_class not in MULTIMODAL_CLASSES:
        raise ConfigurationError(
            f"{pair.multimodal_id!r} is not a multimodal model; check the contrast pair"
        )

    candidates = [pair.multimodal_id, pair.unimodal_id]
    pair_verdicts: dict[Alignment, list[ComparisonVerdict]] = {}
    passes: dict[Alignment, dict[int, bool]] = {}
    for battery in (language, vision):
        verdicts: list[ComparisonVerdict] = []
        tested: list[tuple[ComparisonVerdict, str]] = []
        for e_index, electrode_id in enumerate(battery.electrode_ids):
            verdict, top = compare_at_electrode(
                battery.ci, battery.mask, e_index, electrode_id, candidates, cfg,
                battery_tag=f"pair:{battery.alignment.value}",
            )
            verdicts.append(verdict)
            if top is not None:
                tested.append((verdict, top))
        apply_battery_fdr(tested, cfg.alpha)
        pair_verdicts[battery.alignment] = verdicts
        passes[battery.alignment] = {
            v.electrode_id: _decided(v) and v.winner == pair.multimodal_id
            for v in verdicts
        }

    weak, strict = [], []
    for electrode_id in language.electrode_ids:
        lang_ok = passes[Alignment.LANGUAGE][electrode_id]
        vis_ok = passes[Alignment.VISION][electrode_id]
        weak.append(
            TestOutcome(electrode_id, TestId.WEAK_SLIP, lang_ok, vis_ok, lang_ok or vis_ok)
        )
        strict.append(
            TestOutcome(electrode_id, TestId.STRICT_SLIP, lang_ok, vis_ok, lang_ok and vis_ok)
        )
    return weak, strict, pair_verdicts


def nonlinear_integration_test(
    strict_outcomes: list[TestOutcome],
    language: AlignmentBattery,
    vision: AlignmentBattery,
    specs: dict[str, ModelSpec],
    cfg: ComparisonConfig,
) -> list[TestOutcome]:
    """On strict passers: a multimodal model must beat every linear baseline.

    The electrode's full-battery winner in each alignment serves as the
    champion; it must itself be multimodal (a linear-integration winner fails
    outright) and must beat each linear-integration model pairwise, in both
    alignments. Pairwise p-values are FDR-adjusted per alignment across all
    comparisons in this test.
    """
    linear_ids = sorted(
        m for m, s in specs.items()
        if s.modality_class is ModalityClass.LINEAR_INTEGRATION
    )
    if not linear_ids:
        raise ConfigurationError(
            "nonlinear integration test requires linear-integration models in the battery"
        )
    strict_by_electrode = {o.electrode_id: o for o in strict_outcomes}

    # Pairwise champion-vs-linear comparisons, FDR family per alignment.
    qualified: dict[Alignment, dict[int, bool]] = {}
    champions: dict[Alignment, dict[int, str]] = {}
    for battery in (language, vision):
        e_index_of = {eid: i for i, eid in enumerate(battery.electrode_ids)}
        tested: list[tuple[ComparisonVerdict, str]] = []
        pair_results: dict[int, list[tuple[str, ComparisonVerdict]]] = {}
        champ_map: dict[int, str] = {}
        for electrode_id, outcome in strict_by_electrode.items():
            if not outcome.pass_combined:
                continue
            verdict = battery.verdict_of(electrode_id)
            cls = _winner_class(verdict, specs)
            if cls not in MULTIMODAL_CLASSES:
                continue  # linear-integration (or undecided) champion: fails below
            champion = verdict.winner
            champ_map[electrode_id] = champion
            results = []
            for linear_id in linear_ids:
                pv, top = compare_at_electrode(
                    battery.ci, battery.mask, e_index_of[electrode_id], electrode_id,
                    [champion, linear_id], cfg,
                    battery_tag=f"nonlinear:{battery.alignment.value}:{linear_id}",
                )
                results.append((linear_id, pv))
                if top is not None:
                    tested.append((pv, top))
            pair_results[electrode_id] = results
        apply_battery_fdr(tested, cfg.alpha)
        qualified[battery.alignment] = {
            electrode_id: all(
                _decided(pv) and pv.winner == champ_map[electrode_id]
                for _, pv in results
            )
            for electrode_id, results in pair_results.items()
        }
        champions[battery.alignment] = champ_map

    outcomes = []
    for outcome in strict_outcomes:
        electrode_id = outcome.electrode_id
        if not outcome.pass_combined:
            # Not evaluated: the test is defined only on strict passers.
            outcomes.append(
                TestOutcome(electrode_id, TestId.NONLINEAR_INTEGRATION, False, False, False)
            )
            continue
        lang_ok = qualified[Alignment.LANGUAGE].get(electrode_id, False)
        vis_ok = qualified[Alignment.VISION].get(electrode_id, False)
        detail = {
            "language_champion": champions[Alignment.LANGUAGE].get(electrode_id, ""),
            "vision_champion": champions[Alignment.VISION].get(electrode_id, ""),
        }
        outcomes.append(
            TestOutcome(
                electrode_id, TestId.NONLINEAR_INTEGRATION,
                lang_ok, vis_ok, lang_ok and vis_ok, detail,
            )
        )
    return outcomes


def run_all_tests(
    language: AlignmentBattery,
    vision: AlignmentBattery,
    specs: dict[str, ModelSpec],
    cfg: ComparisonConfig,
    pair: ContrastPair | None = None,
) -> dict[TestId, list[TestOutcome]]:
    """Run the full battery of five tests over both alignments.

    The paired tests are skipped (empty outcome lists) when no contrast pair
    is configured.
    """
    if language.electrode_ids != vision.electrode_ids:
        raise DataError("alignments must share an identical electrode set")
    weak = weak_test(language, vision, specs)
    strict = strict_test(weak)
    nonlinear = nonlinear_integration_test(strict, language, vision, specs, cfg)
    results = {
        TestId.WEAK: weak,
        TestId.STRICT: strict,
        TestId.NONLINEAR_INTEGRATION: nonlinear,
    }
    if pair is not None:
        weak_slip, strict_slip, _ = slip_tests(language, vision, specs, pair, cfg)
        results[TestId.WEAK_SLIP] = weak_slip
        results[TestId.STRICT_SLIP] = strict_slip
    else:
        results[TestId.WEAK_SLIP] = []
        results[TestId.STRICT_SLIP] = []
    return results


@dataclass
class RegionSummaryRow:
    region_label: str
    test_id: TestId
    n_electrodes: int
    n_pass_language: int
    n_pass_vision: int
    n_pass_both: int

    @property
    def pct_language(self) -> float:
        return 100.0 * self.n_pass_language / self.n_electrodes

    @property
    def pct_vision(self) -> float:
        return 100.0 * self.n_pass_vision / self.n_electrodes

    @property
    def has_both_alignments(self) -> bool:
        return self.n_pass_both > 0


def aggregate_regions(
    outcomes_by_test: dict[TestId, list[TestOutcome]],
    electrodes: list[ElectrodeMeta],
    known_regions: frozenset[str],
) -> list[RegionSummaryRow]:
    """Per-region pass counts and percentages for each test and alignment."""
    unknown = [
        e.electrode_id for e in electrodes
        if not is_known_region(e.region_label, known_regions)
    ]
    if unknown:
        raise DataError(f"unknown region label for electrodes {unknown}")
    region_of = {e.electrode_id: e.region_label for e in electrodes}

    rows: list[RegionSummaryRow] = []
    regions = sorted({e.region_label for e in electrodes})
    for test_id, outcomes in outcomes_by_test.items():
        if not outcomes:
            continue
        for region in regions:
            members = [o for o in outcomes if region_of[o.electrode_id] == region]
            if not members:
                continue
            rows.append(
                RegionSummaryRow(
                    region_label=region,
                    test_id=test_id,
                    n_electrodes=len(members),
                    n_pass_language=sum(o.pass_language for o in members),
                    n_pass_vision=sum(o.pass_vision for o in members),
                    n_pass_both=sum(o.pass_language and o.pass_vision for o in members),
                )
            )
    return rows


def report_text(
    outcomes_by_test: dict[TestId, list[TestOutcome]], n_electrodes: int
) -> str:
    """Plain-text summary: electrodes passing each test, per alignment.

    Strict-style tests require both alignments, so both columns carry the
    combined count, mirroring the per-alignment columns of the weak tests.
    """
    labels = {
        TestId.WEAK: "Weak test of multimodality",
        TestId.WEAK_SLIP: "Weak contrast-pair test",
        TestId.STRICT: "Strict test of multimodality",
        TestId.STRICT_SLIP: "Strict contrast-pair test",
        TestId.NONLINEAR_INTEGRATION: "Non-linear integration test",
    }
    either_tests = {TestId.WEAK, TestId.WEAK_SLIP}
    lines = [
        f"{'Test':<34} {'Language-aligned':>18} {'Vision-aligned':>16}",
    ]
    for test_id in TestId:
        outcomes = outcomes_by_test.get(test_id, [])
        if not outcomes:
            lines.append(f"{labels[test_id]:<34} {'n/a':>18} {'n/a':>16}")
            continue
        if test_id in either_tests:
            lang = sum(o.pass_language for o in outcomes)
            vis = sum(o.pass_vision for o in outcomes)
        else:
            lang = vis = sum(o.pass_combined for o in outcomes)
        lines.append(f"{labels[test_id]:<34} {lang:>18} {vis:>16}")
    lines.append(f"(of {n_electrodes} electrodes)")
    return "\n".join(lines) + "\n"
