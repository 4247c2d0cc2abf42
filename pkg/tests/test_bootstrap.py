import math

import numpy as np
import pytest

from brainenc.bootstrap import (
    BootstrapCI,
    bootstrap_scores,
    make_resamples,
    percentile_ranks,
    survivor_mask,
)
from brainenc.encoder import VAL, RidgeConfig, make_folds, run_regression, ScoreTensor
from brainenc.errors import NumericalError
from brainenc.rng import keyed_rng

from test_encoder import tensor_from_targets


def onsets(n):
    return 1000.0 * np.arange(n)


class TestMakeResamples:
    def test_shape_and_range(self):
        rs = make_resamples(50, 20, seed=1, onsets_ms=onsets(50))
        assert rs.indices.shape == (20, 50)
        assert rs.indices.min() >= 0
        assert rs.indices.max() < 50

    def test_rows_sorted_by_onset(self):
        rs = make_resamples(100, 10, seed=2, onsets_ms=onsets(100))
        for row in rs.indices:
            assert np.all(np.diff(row) >= 0)

    def test_unsorted_toggle(self):
        rs = make_resamples(100, 10, seed=2, onsets_ms=onsets(100), sort=False)
        assert any(np.any(np.diff(row) < 0) for row in rs.indices)

    def test_distinct_fraction(self):
        n = 2000
        rs = make_resamples(n, 30, seed=3, onsets_ms=onsets(n))
        fractions = [len(np.unique(row)) / n for row in rs.indices]
        assert np.mean(fractions) == pytest.approx(1 - 1 / math.e, abs=0.02)

    def test_digest_shared_and_seed_sensitive(self):
        a = make_resamples(50, 5, seed=4, onsets_ms=onsets(50))
        b = make_resamples(50, 5, seed=4, onsets_ms=onsets(50))
        c = make_resamples(50, 5, seed=5, onsets_ms=onsets(50))
        assert a.digest() == b.digest()
        assert a.digest() != c.digest()


class TestPercentileRanks:
    def test_b1000(self):
        # 1-based ranks ceil(0.025 B) = 25 and ceil(0.975 B) = 975
        lo, hi = percentile_ranks(1000)
        assert (lo, hi) == (24, 974)

    def test_order_statistics_on_1_to_1000(self):
        values = np.arange(1, 1001, dtype=float)
        lo, hi = percentile_ranks(1000)
        assert values[lo] == 25.0
        assert values[hi] == 975.0

    def test_constant_scores_collapse(self):
        lo, hi = percentile_ranks(1000)
        values = np.full(1000, 0.5)
        assert values[lo] == values[hi] == 0.5


def run_small_bootstrap(values, F, n_resamples=60, seed=0, lam_grid=(0.1, 1.0, 10.0)):
    n = F.shape[0]
    responses = tensor_from_targets(values)
    folds = make_folds(n, 5)
    config = RidgeConfig(lambda_grid=lam_grid, k_folds=5)
    features = {"m": {"layer0": F}}
    scores = ScoreTensor(
        models={"m": run_regression(features["m"], responses, folds, config, model_id="m")},
        electrode_ids=responses.electrode_ids(),
        n_bins=responses.n_bins,
    )
    rs = make_resamples(n, n_resamples, seed, onsets(n))
    ci = bootstrap_scores(features, responses, folds, config, rs, scores)
    return ci, scores


class TestBootstrapScores:
    def test_planted_signal_high_lower_bound(self):
        rng = np.random.default_rng(10)
        n, d, n_bins = 120, 5, 4
        F = rng.standard_normal((n, d))
        signal = F @ rng.standard_normal(d)
        values = np.tile(signal[None, :, None], (1, 1, n_bins))
        ci, _ = run_small_bootstrap(values, F)
        assert np.all(ci.lower["m"][:, :, VAL] > 0.9)

    def test_pure_noise_survivor_fraction(self):
        rng = np.random.default_rng(11)
        n, n_electrodes, n_bins = 200, 6, 10
        F = rng.standard_normal((n, 5))
        values = rng.standard_normal((n_electrodes, n, n_bins))
        ci, _ = run_small_bootstrap(values, F, n_resamples=200, seed=1)
        mask = survivor_mask(ci)
        # expected one-sided rate 2.5%; allow binomial slack over 60 bins
        assert mask.mask["m"].mean() <= 0.06

    def test_survivor_boundary_strict(self):
        mean = np.zeros((1, 3, 3))
        lower = np.zeros((1, 3, 3))
        upper = np.ones((1, 3, 3))
        lower[0, 1, VAL] = 1e-9
        lower[0, 2, VAL] = -1e-9
        ci = BootstrapCI(mean={"m": mean}, lower={"m": lower}, upper={"m": upper}, n_resamples=10)
        mask = survivor_mask(ci)
        assert mask.mask["m"][0].tolist() == [False, True, False]

    def test_ci_ordering_invariant(self):
        rng = np.random.default_rng(12)
        n = 100
        F = rng.standard_normal((n, 4))
        signal = F @ rng.standard_normal(4)
        values = signal[None, :, None] + 0.8 * rng.standard_normal((2, n, 3))
        ci, _ = run_small_bootstrap(values, F)
        for m in ci.model_ids():
            assert np.all(ci.lower[m] <= ci.mean[m] + 1e-12)
            assert np.all(ci.mean[m] <= ci.upper[m] + 1e-12)

    def test_reuses_primary_selection_and_shared_rows(self):
        rng = np.random.default_rng(13)
        n = 100
        F1 = rng.standard_normal((n, 4))
        F2 = rng.standard_normal((n, 4))
        signal = F1 @ rng.standard_normal(4)
        values = signal[None, :, None] + 0.3 * rng.standard_normal((1, n, 3))
        responses = tensor_from_targets(values)
        folds = make_folds(n, 5)
        config = RidgeConfig(lambda_grid=(0.1, 1.0), k_folds=5)
        features = {
            "a": {"layer0": F1},
            "b": {"layer0": F2},
        }
        scores = ScoreTensor(
            models={
                m: run_regression(layers, responses, folds, config, model_id=m)
                for m, layers in features.items()
            },
            electrode_ids=responses.electrode_ids(),
            n_bins=responses.n_bins,
        )
        rs = make_resamples(n, 30, 7, onsets(n))
        ci_pair = bootstrap_scores(features, responses, folds, config, rs, scores)
        # model "a" scored alone against the same rows gives identical draws
        scores_a = ScoreTensor(
            models={"a": scores.models["a"]},
            electrode_ids=responses.electrode_ids(),
            n_bins=responses.n_bins,
        )
        ci_alone = bootstrap_scores(
            {"a": features["a"]}, responses, folds, config, rs, scores_a
        )
        assert np.array_equal(ci_pair.mean["a"], ci_alone.mean["a"])
        assert np.array_equal(ci_pair.lower["a"], ci_alone.lower["a"])

    def test_threads_do_not_change_results(self):
        rng = np.random.default_rng(14)
        n = 100
        F = rng.standard_normal((n, 4))
        values = rng.standard_normal((2, n, 3))
        responses = tensor_from_targets(values)
        folds = make_folds(n, 5)
        config = RidgeConfig(lambda_grid=(1.0,), k_folds=5)
        features = {"m": {"layer0": F}}
        scores = ScoreTensor(
            models={"m": run_regression(features["m"], responses, folds, config, model_id="m")},
            electrode_ids=responses.electrode_ids(),
            n_bins=responses.n_bins,
        )
        rs = make_resamples(n, 20, 9, onsets(n))
        ci1 = bootstrap_scores(features, responses, folds, config, rs, scores, threads=1)
        ci2 = bootstrap_scores(features, responses, folds, config, rs, scores, threads=4)
        assert np.array_equal(ci1.mean["m"], ci2.mean["m"])
        assert np.array_equal(ci1.lower["m"], ci2.lower["m"])
        assert np.array_equal(ci1.upper["m"], ci2.upper["m"])

    def test_monotone_filter_under_noise(self):
        # more noise never increases the expected survivor count
        n, n_bins = 120, 8
        counts = []
        for sigma in (0.3, 1.5, 6.0):
            total = 0
            for seed in range(2):
                rng = keyed_rng("monotone", sigma, seed)
                F = rng.standard_normal((n, 4))
                signal = F @ rng.standard_normal(4)
                signal /= signal.std()
                values = signal[None, :, None] + sigma * rng.standard_normal((1, n, n_bins))
                ci, _ = run_small_bootstrap(values, F, n_resamples=60, seed=seed)
                total += int(survivor_mask(ci).mask["m"].sum())
            counts.append(total)
        assert counts[0] >= counts[1] >= counts[2]

    def test_failure_budget_aborts(self):
        # non-finite features blow up every resample -> abort with diagnostics
        rng = np.random.default_rng(15)
        n = 60
        F = rng.standard_normal((n, 3))
        values = rng.standard_normal((1, n, 2))
        responses = tensor_from_targets(values)
        folds = make_folds(n, 5)
        config = RidgeConfig(lambda_grid=(1.0,), k_folds=5)
        features = {"m": {"layer0": F}}
        scores = ScoreTensor(
            models={"m": run_regression(features["m"], responses, folds, config, model_id="m")},
            electrode_ids=responses.electrode_ids(),
            n_bins=responses.n_bins,
        )
        features["m"]["layer0"] = F.copy()
        features["m"]["layer0"][0, 0] = np.nan
        rs = make_resamples(n, 10, 3, onsets(n))
        with pytest.raises(NumericalError):
            bootstrap_scores(features, responses, folds, config, rs, scores)
