import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brainenc.encoder import (
    VAL,
    TEST,
    RidgeConfig,
    make_folds,
    pearson,
    pearson_columns,
    ridge_fit,
    run_regression,
)
from brainenc.errors import ConfigurationError, DataError, NumericalError
from brainenc.events import ElectrodeMeta, ResponseTensor


def tensor_from_targets(values):
    """[E, N, B] array -> ResponseTensor with stub metadata."""
    values = np.asarray(values, dtype=np.float64)
    electrodes = tuple(ElectrodeMeta(i, 1, "insula") for i in range(values.shape[0]))
    return ResponseTensor(
        electrodes=electrodes,
        values=values,
        bin_centers_ms=np.arange(values.shape[2], dtype=float),
    )


class TestMakeFolds:
    def test_fold0(self):
        plan = make_folds(100, 5)
        train, val, test = plan.split(0)
        assert train.tolist() == list(range(0, 80))
        assert val.tolist() == list(range(80, 90))
        assert test.tolist() == list(range(90, 100))

    def test_fold1_rotated(self):
        train, val, test = make_folds(100, 5).split(1)
        assert train.tolist() == list(range(20, 100))
        assert val.tolist() == list(range(0, 10))
        assert test.tolist() == list(range(10, 20))

    def test_partition_property(self):
        plan = make_folds(103, 5)
        for f in range(5):
            train, val, test = plan.split(f)
            combined = np.concatenate([train, val, test])
            assert sorted(combined.tolist()) == list(range(103))

    def test_sizes_within_one(self):
        for n in (57, 103, 1000):
            plan = make_folds(n, 5)
            for f in range(5):
                train, val, test = plan.split(f)
                assert abs(len(train) - 0.8 * n) <= 1
                assert abs(len(val) - 0.1 * n) <= 1
                assert abs(len(test) - 0.1 * n) <= 1

    def test_contiguous_on_circle(self):
        plan = make_folds(60, 5)
        for f in range(5):
            for part in plan.split(f):
                steps = np.diff(part) % 60
                assert np.all(steps == 1)

    def test_too_few_events(self):
        with pytest.raises(ConfigurationError):
            make_folds(49, 5)


class TestRidgeFit:
    def test_exact_interpolation(self):
        beta = ridge_fit(np.array([[1.0], [2.0]]), np.array([1.0, 2.0]), 0.0)
        assert beta[0, 0] == pytest.approx(1.0)

    def test_hand_computed_shrinkage(self):
        # (P'P + I)^-1 P'y = 5 / 6 for P = [1, 2]', y = [1, 2]'
        beta = ridge_fit(np.array([[1.0], [2.0]]), np.array([1.0, 2.0]), 1.0)
        assert beta[0, 0] == pytest.approx(5.0 / 6.0)

    def test_identity_design(self):
        Y = np.random.default_rng(0).standard_normal((6, 6))
        beta = ridge_fit(np.eye(6), Y, 0.0)
        assert np.allclose(beta, Y, atol=1e-10)

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n, d = int(rng.integers(5, 51)), int(rng.integers(1, 11))
            P = rng.standard_normal((n, d))
            Y = rng.standard_normal((n, 3))
            for lam in (0.1, 1.0, 10.0):
                expected = np.linalg.inv(P.T @ P + lam * np.eye(d)) @ (P.T @ Y)
                got = ridge_fit(P, Y, lam)
                assert np.linalg.norm(got - expected) <= 1e-8 * np.linalg.norm(expected)

    def test_dual_matches_primal(self):
        # wide matrix triggers the sample-side Gram route
        rng = np.random.default_rng(2)
        P = rng.standard_normal((15, 40))
        Y = rng.standard_normal((15, 2))
        lam = 0.5
        expected = np.linalg.inv(P.T @ P + lam * np.eye(40)) @ (P.T @ Y)
        assert np.allclose(ridge_fit(P, Y, lam), expected, atol=1e-9)

    def test_shrinkage_monotone(self):
        rng = np.random.default_rng(3)
        P = rng.standard_normal((30, 8))
        Y = rng.standard_normal((30, 4))
        norms = [np.linalg.norm(ridge_fit(P, Y, lam)) for lam in (0.1, 1.0, 10.0, 100.0)]
        assert all(a >= b for a, b in zip(norms, norms[1:]))

    def test_singular_surfaces(self):
        P = np.zeros((4, 3))
        with pytest.raises(NumericalError):
            ridge_fit(P, np.zeros(4), 0.0)


class TestPearson:
    def test_perfect_positive(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_perfect_negative(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_computed(self):
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_degenerate_flagged(self):
        r, degenerate = pearson([1, 1, 1], [1, 2, 3], return_degenerate=True)
        assert r == 0.0
        assert degenerate

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            pearson([1, 2], [1, 2, 3])

    @given(
        st.lists(st.floats(-100, 100), min_size=2, max_size=30),
        st.integers(0, 2**31),
    )
    @settings(max_examples=50, deadline=None)
    def test_matches_direct_definition(self, xs, seed):
        x = np.array(xs)
        y = np.random.default_rng(seed).standard_normal(len(xs))
        r = pearson(x, y)
        mx, my = x.mean(), y.mean()
        vx = ((x - mx) ** 2).sum()
        vy = ((y - my) ** 2).sum()
        expected = 0.0 if vx == 0 or vy == 0 else ((x - mx) @ (y - my)) / np.sqrt(vx * vy)
        assert r == pytest.approx(np.clip(expected, -1, 1), abs=1e-12)

    def test_columns_match_scalar(self):
        rng = np.random.default_rng(4)
        X, Y = rng.standard_normal((20, 5)), rng.standard_normal((20, 5))
        rs, degen = pearson_columns(X, Y)
        for j in range(5):
            assert rs[j] == pytest.approx(pearson(X[:, j], Y[:, j]), abs=1e-14)
        assert not degen.any()


def small_config():
    return RidgeConfig(lambda_grid=(0.1, 1.0, 10.0), k_folds=5)


class TestRunRegression:
    def test_noiseless_linear_target(self):
        rng = np.random.default_rng(5)
        n, d, n_bins = 100, 6, 4
        F = rng.standard_normal((n, d))
        w = rng.standard_normal(d)
        signal = F @ w
        values = np.stack([np.stack([signal * (1 + 0.1 * b) for b in range(n_bins)], axis=-1)])
        responses = tensor_from_targets(values)
        folds = make_folds(n, 5)
        scores = run_regression({"layer0": F}, responses, folds, small_config())
        assert np.all(scores.curve(TEST) >= 0.999)

    def test_white_noise_centered_at_zero(self):
        rng = np.random.default_rng(6)
        n, n_electrodes, n_bins = 500, 4, 5
        F = rng.standard_normal((n, 8))
        values = rng.standard_normal((n_electrodes, n, n_bins))
        responses = tensor_from_targets(values)
        folds = make_folds(n, 5)
        scores = run_regression({"layer0": F}, responses, folds, small_config())
        n_test = len(folds.split(0)[2])
        assert abs(scores.curve(TEST).mean()) < 2.0 / np.sqrt(n_test * folds.k)

    def test_matches_direct_composition(self):
        # single layer, single lambda: pipeline equals ridge_fit + pearson
        rng = np.random.default_rng(7)
        n = 60
        F = rng.standard_normal((n, 5))
        values = rng.standard_normal((2, n, 3))
        responses = tensor_from_targets(values)
        folds = make_folds(n, 5)
        lam = 1.0
        config = RidgeConfig(lambda_grid=(lam,), k_folds=5)
        scores = run_regression({"layer0": F}, responses, folds, config)

        from brainenc.features import apply_standardizer, fit_standardizer

        expected = np.zeros((2, 3))
        for f in range(folds.k):
            tr, va, te = folds.split(f)
            std = fit_standardizer(F[tr])
            coef = ridge_fit(apply_standardizer(std, F[tr]),
                             values.transpose(1, 0, 2).reshape(n, -1)[tr], lam)
            pred = apply_standardizer(std, F[te]) @ coef
            actual = values.transpose(1, 0, 2).reshape(n, -1)[te]
            r, _ = pearson_columns(pred, actual)
            expected += r.reshape(2, 3)
        expected /= folds.k
        assert np.allclose(scores.curve(TEST), expected, atol=1e-12)

    def test_selection_ignores_test_targets(self):
        # One fold isolates the information flow: with rotated folds an
        # event serves as training data elsewhere, so only k=1 lets the test
        # block be permuted without touching what selection may read.
        rng = np.random.default_rng(8)
        n = 80
        layers = {
            "layer0": rng.standard_normal((n, 5)),
            "layer1": rng.standard_normal((n, 5)),
        }
        signal = layers["layer1"] @ rng.standard_normal(5)
        values = (signal[None, :, None] + 0.5 * rng.standard_normal((2, n, 3)))
        responses = tensor_from_targets(values)
        folds = make_folds(n, 1)
        config = RidgeConfig(lambda_grid=(0.1, 1.0, 10.0), k_folds=1)
        scores = run_regression(layers, responses, folds, config)

        test_idx = folds.split(0)[2]
        permuted = values.copy()
        permuted[:, test_idx, :] = permuted[:, test_idx[::-1], :]
        scores2 = run_regression(
            dict(layers), tensor_from_targets(permuted), folds, config
        )
        assert np.array_equal(scores.chosen_layer, scores2.chosen_layer)
        for l1, l2 in zip(scores.layers, scores2.layers):
            assert np.array_equal(l1.lambda_idx, l2.lambda_idx)
        assert not np.allclose(scores.curve(TEST), scores2.curve(TEST))
        assert np.allclose(scores.curve(VAL), scores2.curve(VAL), atol=1e-12)

    def test_informative_layer_selected(self):
        rng = np.random.default_rng(9)
        n = 80
        good = rng.standard_normal((n, 5))
        bad = rng.standard_normal((n, 5))
        signal = good @ rng.standard_normal(5)
        values = signal[None, :, None] * np.ones((1, 1, 3))
        responses = tensor_from_targets(values)
        folds = make_folds(n, 5)
        scores = run_regression(
            {"bad": bad, "good": good}, responses, folds, small_config()
        )
        assert scores.layer_ids[scores.chosen_layer[0]] == "good"

    def test_split_hygiene(self):
        plan = make_folds(250, 5)
        for f in range(plan.k):
            train, val, test = plan.split(f)
            assert not set(train) & set(val)
            assert not set(train) & set(test)
            assert not set(val) & set(test)

    def test_zero_lambda_rejected_in_grid(self):
        with pytest.raises(ConfigurationError):
            RidgeConfig(lambda_grid=(0.0, 1.0))
