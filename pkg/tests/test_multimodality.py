import numpy as np
import pytest

from brainenc.comparison import (
    ComparisonConfig,
    ModalityClass,
    ModelSpec,
    compare_battery,
)
from brainenc.errors import ConfigurationError, DataError
from brainenc.events import Alignment, ElectrodeMeta
from brainenc.multimodality import (
    AlignmentBattery,
    ContrastPair,
    TestId,
    aggregate_regions,
    nonlinear_integration_test,
    report_text,
    run_all_tests,
    slip_tests,
    strict_test,
    weak_test,
)
from brainenc.regions import load_region_labels
from brainenc.rng import keyed_rng

from test_comparison import make_ci

SPECS = {
    "mm": ModelSpec("mm", ModalityClass.MULTIMODAL_TRAINED, True),
    "concat": ModelSpec("concat", ModalityClass.LINEAR_INTEGRATION, True),
    "linproj": ModelSpec("linproj", ModalityClass.LINEAR_INTEGRATION, True),
    "lang": ModelSpec("lang", ModalityClass.UNIMODAL_LANGUAGE, True),
    "vis": ModelSpec("vis", ModalityClass.UNIMODAL_VISION, True),
}

CFG = ComparisonConfig(alpha=0.05, min_bins=10, n_bin_resamples=300, seed=3)


def flat(level, n_bins=15, jitter=0.0, key=None):
    base = np.full((1, n_bins), float(level))
    if jitter:
        base = base + jitter * keyed_rng("mmtest", key).standard_normal((1, n_bins))
    return base


def build_battery(alignment, curves):
    """curves: model -> [n_electrodes, n_bins] mean score array."""
    ci, mask = make_ci(curves)
    n_e = next(iter(curves.values())).shape[0]
    verdicts = compare_battery(
        ci, mask, list(range(n_e)), CFG, battery_tag=f"full:{alignment.value}"
    )
    return AlignmentBattery(
        alignment=alignment, ci=ci, mask=mask, verdicts=verdicts,
        electrode_ids=list(range(n_e)),
    )


def stack(rows):
    """Per-electrode curve dict list -> model -> [n_e, bins] arrays."""
    models = rows[0].keys()
    return {m: np.concatenate([r[m] for r in rows], axis=0) for m in models}


def three_electrode_curves(key):
    """e0: mm dominates; e1: concat dominates; e2: vis dominates."""
    j = 0.005
    return stack([
        {
            "mm": flat(0.6, jitter=j, key=(key, "mm", 0)),
            "concat": flat(0.3, jitter=j, key=(key, "c", 0)),
            "linproj": flat(0.25, jitter=j, key=(key, "lp", 0)),
            "lang": flat(0.1, jitter=j, key=(key, "la", 0)),
            "vis": flat(0.1, jitter=j, key=(key, "vi", 0)),
        },
        {
            "mm": flat(0.15, jitter=j, key=(key, "mm", 1)),
            "concat": flat(0.55, jitter=j, key=(key, "c", 1)),
            "linproj": flat(0.3, jitter=j, key=(key, "lp", 1)),
            "lang": flat(0.2, jitter=j, key=(key, "la", 1)),
            "vis": flat(0.1, jitter=j, key=(key, "vi", 1)),
        },
        {
            "mm": flat(0.1, jitter=j, key=(key, "mm", 2)),
            "concat": flat(0.2, jitter=j, key=(key, "c", 2)),
            "linproj": flat(0.15, jitter=j, key=(key, "lp", 2)),
            "lang": flat(0.25, jitter=j, key=(key, "la", 2)),
            "vis": flat(0.6, jitter=j, key=(key, "vi", 2)),
        },
    ])


@pytest.fixture
def batteries():
    return (
        build_battery(Alignment.LANGUAGE, three_electrode_curves("L")),
        build_battery(Alignment.VISION, three_electrode_curves("V")),
    )


class TestWeakAndStrict:
    def test_weak_rule(self, batteries):
        language, vision = batteries
        outcomes = weak_test(language, vision, SPECS)
        # mm winner passes, concat (linear integration) passes, vis fails
        assert [o.pass_combined for o in outcomes] == [True, True, False]

    def test_strict_requires_both(self, batteries):
        language, _ = batteries
        # vision alignment where nothing survives: all models dead
        dead = {m: np.full((3, 15), -0.5) for m in SPECS}
        vision = build_battery(Alignment.VISION, dead)
        weak = weak_test(language, vision, SPECS)
        strict = strict_test(weak)
        assert [o.pass_combined for o in weak] == [True, True, False]
        assert [o.pass_combined for o in strict] == [False, False, False]

    def test_strict_subset_of_weak(self, batteries):
        language, vision = batteries
        weak = weak_test(language, vision, SPECS)
        strict = strict_test(weak)
        for w, s in zip(weak, strict):
            if s.pass_combined:
                assert w.pass_language and w.pass_vision


class TestSlip:
    def test_pair_pass_and_fail(self, batteries):
        language, vision = batteries
        weak_slip, strict_slip, _ = slip_tests(
            language, vision, SPECS, ContrastPair("mm", "vis"), CFG
        )
        # e0: mm beats vis in both alignments
        assert weak_slip[0].pass_combined and strict_slip[0].pass_combined
        # e2: vis wins the pair
        assert not weak_slip[2].pass_combined

    def test_identical_members_never_pass(self):
        curve = flat(0.5)
        curves = {m: curve.copy() for m in SPECS}
        language = build_battery(Alignment.LANGUAGE, curves)
        vision = build_battery(Alignment.VISION, curves)
        weak_slip, strict_slip, pair_verdicts = slip_tests(
            language, vision, SPECS, ContrastPair("mm", "vis"), CFG
        )
        assert not weak_slip[0].pass_combined
        assert not strict_slip[0].pass_combined
        for verdicts in pair_verdicts.values():
            assert all(v.p_raw is None or v.p_raw == 1.0 for v in verdicts)

    def test_missing_pair_configuration(self, batteries):
        language, vision = batteries
        with pytest.raises(ConfigurationError):
            slip_tests(language, vision, SPECS, None, CFG)
        with pytest.raises(ConfigurationError):
            slip_tests(language, vision, SPECS, ContrastPair("nope", "vis"), CFG)
        with pytest.raises(ConfigurationError):
            # unimodal model in the multimodal slot
            slip_tests(language, vision, SPECS, ContrastPair("lang", "vis"), CFG)


class TestNonlinearIntegration:
    def test_champion_beats_linears(self, batteries):
        language, vision = batteries
        weak = weak_test(language, vision, SPECS)
        strict = strict_test(weak)
        outcomes = nonlinear_integration_test(strict, language, vision, SPECS, CFG)
        by_e = {o.electrode_id: o for o in outcomes}
        assert by_e[0].pass_combined  # mm champion beats concat and linproj
        assert not by_e[1].pass_combined  # linear-integration winner fails
        assert not by_e[2].pass_combined  # not a strict passer: not evaluated

    def test_requires_linear_models(self, batteries):
        language, vision = batteries
        weak = weak_test(language, vision, SPECS)
        strict = strict_test(weak)
        no_linear = {k: v for k, v in SPECS.items() if k not in ("concat", "linproj")}
        with pytest.raises(ConfigurationError):
            nonlinear_integration_test(strict, language, vision, no_linear, CFG)

    def test_monotone_strictness(self, batteries):
        language, vision = batteries
        outcomes = run_all_tests(language, vision, SPECS, CFG, ContrastPair("mm", "vis"))
        strict = {o.electrode_id: o.pass_combined for o in outcomes[TestId.STRICT]}
        weak = {o.electrode_id: o for o in outcomes[TestId.WEAK]}
        nonlin = {o.electrode_id: o.pass_combined for o in outcomes[TestId.NONLINEAR_INTEGRATION]}
        wslip = {o.electrode_id: o for o in outcomes[TestId.WEAK_SLIP]}
        sslip = {o.electrode_id: o.pass_combined for o in outcomes[TestId.STRICT_SLIP]}
        for e, passed in strict.items():
            if passed:
                assert weak[e].pass_language and weak[e].pass_vision
        for e, passed in nonlin.items():
            if passed:
                assert strict[e]
        for e, passed in sslip.items():
            if passed:
                assert wslip[e].pass_language and wslip[e].pass_vision

    def test_label_only_dependence(self):
        # Renaming models (keeping class assignments on the same curves)
        # leaves every outcome unchanged.
        renames = {"mm": "net_x", "concat": "net_y", "linproj": "net_z",
                   "lang": "net_u", "vis": "net_v"}
        specs2 = {
            renames[m]: ModelSpec(renames[m], s.modality_class, s.trained)
            for m, s in SPECS.items()
        }
        out1 = run_all_tests(
            build_battery(Alignment.LANGUAGE, three_electrode_curves("L")),
            build_battery(Alignment.VISION, three_electrode_curves("V")),
            SPECS, CFG, ContrastPair("mm", "vis"),
        )
        curves_l = {renames[m]: c for m, c in three_electrode_curves("L").items()}
        curves_v = {renames[m]: c for m, c in three_electrode_curves("V").items()}
        out2 = run_all_tests(
            build_battery(Alignment.LANGUAGE, curves_l),
            build_battery(Alignment.VISION, curves_v),
            specs2, CFG, ContrastPair("net_x", "net_v"),
        )
        for test_id in TestId:
            flags1 = [(o.pass_language, o.pass_vision, o.pass_combined) for o in out1[test_id]]
            flags2 = [(o.pass_language, o.pass_vision, o.pass_combined) for o in out2[test_id]]
            assert flags1 == flags2


class TestAggregateRegions:
    def outcomes_fixture(self):
        from brainenc.multimodality import TestOutcome

        return {
            TestId.WEAK: [
                TestOutcome(0, TestId.WEAK, True, True, True),
                TestOutcome(1, TestId.WEAK, True, False, True),
                TestOutcome(2, TestId.WEAK, False, False, False),
                TestOutcome(3, TestId.WEAK, False, True, True),
            ]
        }

    def electrodes(self, region="insula"):
        return [
            ElectrodeMeta(0, 1, region),
            ElectrodeMeta(1, 1, region),
            ElectrodeMeta(2, 1, region),
            ElectrodeMeta(3, 1, "cuneus"),
        ]

    def test_percentages(self):
        rows = aggregate_regions(
            self.outcomes_fixture(), self.electrodes(), load_region_labels()
        )
        by_region = {r.region_label: r for r in rows}
        insula = by_region["insula"]
        assert insula.n_electrodes == 3
        assert insula.n_pass_language == 2
        assert insula.pct_language == pytest.approx(200.0 / 3.0)
        assert insula.n_pass_both == 1
        assert insula.has_both_alignments

    def test_zero_pass_region(self):
        outcomes = self.outcomes_fixture()
        for o in outcomes[TestId.WEAK]:
            o.pass_language = o.pass_vision = o.pass_combined = False
        rows = aggregate_regions(outcomes, self.electrodes(), load_region_labels())
        assert all(r.n_pass_language == 0 and not r.has_both_alignments for r in rows)

    def test_counts_sum_to_total(self):
        rows = aggregate_regions(
            self.outcomes_fixture(), self.electrodes(), load_region_labels()
        )
        outcomes = self.outcomes_fixture()[TestId.WEAK]
        assert sum(r.n_pass_language for r in rows) == sum(o.pass_language for o in outcomes)

    def test_unknown_region_rejected(self):
        with pytest.raises(DataError) as err:
            aggregate_regions(
                self.outcomes_fixture(), self.electrodes(region="nonsense"),
                load_region_labels(),
            )
        assert "0" in str(err.value)

    def test_hemisphere_prefix_accepted(self):
        rows = aggregate_regions(
            self.outcomes_fixture(), self.electrodes(region="lh-insula"),
            load_region_labels(),
        )
        assert any(r.region_label == "lh-insula" for r in rows)


class TestReportText:
    def test_shape(self, batteries):
        language, vision = batteries
        outcomes = run_all_tests(language, vision, SPECS, CFG, ContrastPair("mm", "vis"))
        text = report_text(outcomes, 3)
        lines = text.strip().splitlines()
        assert len(lines) == 7  # header + 5 tests + total
        assert "Language-aligned" in lines[0]
        assert "(of 3 electrodes)" in lines[-1]
