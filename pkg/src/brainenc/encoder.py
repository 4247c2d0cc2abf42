"""Contiguous k-fold ridge regression with Pearson scoring.

Events are split into contiguous train/validation/test chunks that rotate
around the movie circle from fold to fold, controlling for the autoregressive
structure of the stimulus. All electrode x bin targets are solved together
against one factorized Gram matrix per (layer, fold, lambda). Lambda is chosen
per (layer, electrode) and the layer per electrode, both on validation scores
only; test targets never influence selection.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from brainenc.blas import single_thread_blas
from brainenc.errors import ConfigurationError, DataError, NumericalError
from brainenc.events import ResponseTensor
from brainenc.features import apply_standardizer, fit_standardizer

TRAIN, VAL, TEST = 0, 1, 2
N_SPLITS = 3
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class FoldPlan:
    """Circularly rotated contiguous 80/10/10 splits."""

    n_events: int
    k: int
    folds: tuple[tuple[np.ndarray, np.ndarray, np.ndarray], ...]

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.folds[fold]


def make_folds(n_events: int, k: int = 5) -> FoldPlan:
    """Build the rotated contiguous fold plan.

    Fold 0 is train [0, 0.8n), val [0.8n, 0.9n), test [0.9n, n); fold f
    rotates every boundary by round(f*n/k) positions around the circle.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if n_events < 10 * k:
        raise ConfigurationError(f"need at least {10 * k} events for {k} folds, got {n_events}")
    n_train = int(round(0.8 * n_events))
    n_val = int(round(0.1 * n_events))
    n_test = n_events - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ConfigurationError("fold sizes degenerate")
    folds = []
    base = np.arange(n_events, dtype=np.int64)
    for f in range(k):
        start = int(round(f * n_events / k)) % n_events
        rotated = np.roll(base, -start)
        folds.append(
            (
                rotated[:n_train].copy(),
                rotated[n_train : n_train + n_val].copy(),
                rotated[n_train + n_val :].copy(),
            )
        )
    return FoldPlan(n_events=n_events, k=k, folds=tuple(folds))


@dataclass(frozen=True)
class RidgeConfig:
    """Penalty grid (log-spaced) and cross-validation arity."""

    lambda_grid: tuple[float, ...] = tuple(float(v) for v in np.logspace(-1.0, 6.0, 8))
    k_folds: int = 5
    solver_tol: float | None = None  # optional residual check on the solve

    def __post_init__(self) -> None:
        if any(lam < 0 for lam in self.lambda_grid):
            raise ConfigurationError("lambda values must be positive")
        if any(lam == 0 for lam in self.lambda_grid):
            # lambda = 0 risks singular systems; it is allowed only when calling
            # ridge_fit directly (oracle tests), never in a production grid.
            raise ConfigurationError("lambda = 0 is not allowed in a grid")


def ridge_fit(P: np.ndarray, Y: np.ndarray, lam: float, solver_tol: float | None = None) -> np.ndarray:
    """Solve B = (P'P + lam I)^-1 P'Y for all target columns at once.

    Uses a Cholesky factorization of the feature Gram matrix, or of the
    sample Gram matrix when D > n (identical solution for lam > 0; the dual
    form is cheaper for wide matrices).
    """
    P = np.asarray(P, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = P.shape
    if lam < 0:
        raise ConfigurationError("lambda must be >= 0")
    try:
        if lam == 0.0 or d <= n:
            gram = P.T @ P
            gram[np.diag_indices_from(gram)] += lam
            rhs = P.T @ Y
            factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
            coef = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        else:
            gram = P @ P.T
            gram[np.diag_indices_from(gram)] += lam
            factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
            coef = P.T @ scipy.linalg.cho_solve(factor, Y, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(f"ridge system singular at lambda={lam}: {exc}") from exc
    if solver_tol is not None:
        resid = np.linalg.norm(P.T @ (P @ coef) + lam * coef - P.T @ Y)
        scale = max(np.linalg.norm(P.T @ Y), 1e-300)
        if resid / scale > solver_tol:
            raise NumericalError(f"ridge solve residual {resid / scale:.3e} exceeds {solver_tol:.3e}")
    return coef


class FoldSolver:
    """Ridge solves over one fold's standardized features, one Gram per fold.

    The Gram matrix is computed once and re-factorized per lambda; for wide
    feature matrices (D > n) the sample-side Gram is used instead, with
    predictions formed through precomputed cross products so the D-sized
    coefficient matrix never materializes. Both routes give the identical
    closed-form ridge solution for lambda > 0.
    """

    def __init__(self, train: np.ndarray, others: tuple[np.ndarray, ...]):
        n, d = train.shape
        self.dual = d > n
        self.train = train
        if self.dual:
            self.gram = train @ train.T
            self.cross = tuple(p @ train.T for p in (train, *others))
        else:
            self.gram = train.T @ train
            self.mats = (train, *others)

    def prepare(self, y_train: np.ndarray) -> np.ndarray:
        """Target-side precomputation shared by every lambda."""
        return y_train if self.dual else self.train.T @ y_train

    def predict(self, prepared: np.ndarray, lam: float) -> tuple[np.ndarray, ...]:
        """Predictions on (train, *others) for the prepared targets."""
        G = self.gram.copy()
        G[np.diag_indices_from(G)] += lam
        try:
            factor = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
            sol = scipy.linalg.cho_solve(factor, prepared, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise NumericalError(f"ridge system singular at lambda={lam}: {exc}") from exc
        if self.dual:
            return tuple(c @ sol for c in self.cross)
        return tuple(m @ sol for m in self.mats)


def pearson(x, y, return_degenerate: bool = False):
    """Sample Pearson correlation; zero-variance input yields r = 0, flagged."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("pearson expects two equal-length 1-D sequences")
    if x.size < 2:
        raise DataError("pearson needs at least 2 samples")
    r, degen = pearson_columns(x[:, None], y[:, None])
    if return_degenerate:
        return float(r[0]), bool(degen[0])
    return float(r[0])


def pearson_columns(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise Pearson r between two [n, T] matrices.

    Returns (r, degenerate) where degenerate marks zero-variance columns whose
    r was pinned to 0.
    """
    return CenteredTargets(Y).correlate(X)


class CenteredTargets:
    """Target-side Pearson precomputation, reused across many predictions."""

    def __init__(self, Y: np.ndarray):
        self.Yc = Y - Y.mean(axis=0)
        self.sy = np.einsum("ij,ij->j", self.Yc, self.Yc)

    def subset(self, cols: np.ndarray) -> "CenteredTargets":
        out = object.__new__(CenteredTargets)
        out.Yc = self.Yc[:, cols]
        out.sy = self.sy[cols]
        return out

    def correlate(self, pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Xc = pred - pred.mean(axis=0)
        sx = np.einsum("ij,ij->j", Xc, Xc)
        cov = np.einsum("ij,ij->j", Xc, self.Yc)
        degenerate = (sx == 0.0) | (self.sy == 0.0)
        denom = np.sqrt(sx * self.sy)
        denom[degenerate] = 1.0
        r = cov / denom
        r[degenerate] = 0.0
        np.clip(r, -1.0, 1.0, out=r)
        return r, degenerate


@dataclass
class LayerScores:
    """Fold-averaged scores for one layer at each electrode's chosen lambda."""

    layer_id: str
    scores: np.ndarray  # [n_electrodes, n_bins, 3] (train, val, test)
    lambda_idx: np.ndarray  # [n_electrodes] index into the lambda grid


@dataclass
class ModelScores:
    """Per-layer scores plus the validation-selected layer per electrode."""

    model_id: str
    layer_ids: list[str]
    layers: list[LayerScores]
    chosen_layer: np.ndarray  # [n_electrodes]
    lambda_grid: np.ndarray

    def curve(self, split: int) -> np.ndarray:
        """Score curve [n_electrodes, n_bins] of each electrode's chosen layer."""
        n_e, n_b, _ = self.layers[0].scores.shape
        out = np.empty((n_e, n_b), dtype=np.float64)
        for e in range(n_e):
            out[e] = self.layers[self.chosen_layer[e]].scores[e, :, split]
        return out

    def chosen_lambda_idx(self) -> np.ndarray:
        """Lambda index of the chosen layer, per electrode."""
        n_e = self.chosen_layer.shape[0]
        return np.array(
            [self.layers[self.chosen_layer[e]].lambda_idx[e] for e in range(n_e)],
            dtype=np.int64,
        )


@dataclass
class ScoreTensor:
    """All models' scores over one alignment dataset."""

    models: dict[str, ModelScores]
    electrode_ids: list[int]
    n_bins: int

    def __getitem__(self, model_id: str) -> ModelScores:
        return self.models[model_id]


def _flatten_targets(responses: ResponseTensor) -> np.ndarray:
    """[E, N, B] -> [N, E*B] so every electrode x bin is one regression target."""
    return np.ascontiguousarray(responses.values.transpose(1, 0, 2).reshape(responses.n_events, -1))


def _score_layer(
    F: np.ndarray,
    targets: np.ndarray,
    folds: FoldPlan,
    config: RidgeConfig,
    n_electrodes: int,
    n_bins: int,
    layer_id: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Fold-averaged scores per lambda and the per-electrode chosen lambda.

    Returns (scores [n_lambda, E, B, 3], lambda_idx [E]).
    """
    n_lambda = len(config.lambda_grid)
    acc = np.zeros((n_lambda, n_electrodes * n_bins, N_SPLITS), dtype=np.float64)
    for f in range(folds.k):
        train_idx, val_idx, test_idx = folds.split(f)
        std = fit_standardizer(F[train_idx])
        solver = FoldSolver(
            apply_standardizer(std, F[train_idx]),
            (apply_standardizer(std, F[val_idx]), apply_standardizer(std, F[test_idx])),
        )
        ys = (targets[train_idx], targets[val_idx], targets[test_idx])
        centered = tuple(CenteredTargets(y) for y in ys)
        prepared = solver.prepare(ys[TRAIN])
        for li, lam in enumerate(config.lambda_grid):
            preds = solver.predict(prepared, lam)
            for s in (TRAIN, VAL, TEST):
                if not np.isfinite(preds[s]).all():
                    raise NumericalError(
                        f"non-finite predictions (layer={layer_id}, lambda={lam}, fold={f})"
                    )
                r, _ = centered[s].correlate(preds[s])
                acc[li, :, s] += r
    acc /= folds.k
    scores = acc.reshape(n_lambda, n_electrodes, n_bins, N_SPLITS)
    # Choose lambda per electrode on the bin-averaged validation score; ties
    # resolve to the smallest lambda (argmax takes the first maximum).
    val_mean = scores[:, :, :, VAL].mean(axis=2)
    lambda_idx = np.argmax(val_mean, axis=0)
    return scores, lambda_idx


def run_regression(
    features: dict[str, np.ndarray],
    responses: ResponseTensor,
    folds: FoldPlan,
    config: RidgeConfig,
    model_id: str = "model",
    threads: int = 1,
) -> ModelScores:
    """Score one model's layers and select lambda/layer on validation data.

    `features` maps layer_id -> projected feature matrix [n_events, p], in
    network depth order (ties in layer selection go to the earliest layer).
    """
    n_events = responses.n_events
    for layer_id, F in features.items():
        if F.shape[0] != n_events:
            raise DataError(
                f"{model_id}/{layer_id}: {F.shape[0]} feature rows vs {n_events} events"
            )
    targets = _flatten_targets(responses)
    layer_ids = list(features.keys())
    results: list[LayerScores | None] = [None] * len(layer_ids)

    def work(i: int) -> None:
        layer_id = layer_ids[i]
        scores, lambda_idx = _score_layer(
            features[layer_id], targets, folds, config,
            responses.n_electrodes, responses.n_bins, layer_id,
        )
        picked = scores[lambda_idx, np.arange(responses.n_electrodes)]
        results[i] = LayerScores(layer_id=layer_id, scores=picked, lambda_idx=lambda_idx)

    with single_thread_blas():
        if threads > 1 and len(layer_ids) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, range(len(layer_ids))))
        else:
            for i in range(len(layer_ids)):
                work(i)

    layers = [ls for ls in results if ls is not None]
    # Layer choice per electrode: highest bin-averaged validation score,
    # earliest layer on ties.
    val_means = np.stack([ls.scores[:, :, VAL].mean(axis=1) for ls in layers])
    chosen = np.argmax(val_means, axis=0)
    return ModelScores(
        model_id=model_id,
        layer_ids=[ls.layer_id for ls in layers],
        layers=layers,
        chosen_layer=chosen.astype(np.int64),
        lambda_grid=np.asarray(config.lambda_grid, dtype=np.float64),
    )
