"""First-order bootstrap over event structures.

Events (and their responses) are resampled with replacement, each resample is
sorted back into movie order to preserve the autoregressive structure, and
the full fold regression is re-run per resample to yield 95% confidence
intervals per (model, electrode, bin, split). Every model is scored against
the identical resample rows. The validation-score lower bound drives the
survivor-bin filter used by all downstream comparisons.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from brainenc.blas import single_thread_blas
from brainenc.errors import DataError, NumericalError
from brainenc.encoder import (
    N_SPLITS,
    TRAIN,
    VAL,
    TEST,
    CenteredTargets,
    FoldPlan,
    FoldSolver,
    RidgeConfig,
    ScoreTensor,
    _flatten_targets,
)
from brainenc.events import ResponseTensor
from brainenc.features import apply_standardizer, fit_standardizer
from brainenc.rng import keyed_rng


@dataclass
class ResampleSet:
    """B rows of event indices, sampled with replacement and movie-sorted.

    The same set must be used for every model in a battery so that model
    scores are comparable resample by resample.
    """

    indices: np.ndarray  # [B, n_events] int64
    seed: int
    sorted_by_onset: bool

    @property
    def n_resamples(self) -> int:
        return self.indices.shape[0]

    def digest(self) -> str:
        """Hash of the index rows; equal digests certify shared resamples."""
        return hashlib.sha256(np.ascontiguousarray(self.indices).tobytes()).hexdigest()


def make_resamples(
    n_events: int,
    n_resamples: int,
    seed: int,
    onsets_ms: np.ndarray,
    sort: bool = True,
) -> ResampleSet:
    """Draw resample rows from generators keyed by (seed, row).

    Sorting by onset is the default treatment of autocorrelation; it can be
    disabled to measure the upward skew unsorted scores exhibit.
    """
    if n_events < 2:
        raise DataError("resampling needs at least 2 events")
    onsets_ms = np.asarray(onsets_ms, dtype=np.float64)
    if onsets_ms.shape != (n_events,):
        raise DataError("onsets_ms must have one entry per event")
    rows = np.empty((n_resamples, n_events), dtype=np.int64)
    for b in range(n_resamples):
        draw = keyed_rng("resample", seed, b).integers(0, n_events, size=n_events)
        if sort:
            draw = draw[np.argsort(onsets_ms[draw], kind="stable")]
        rows[b] = draw
    return ResampleSet(indices=rows, seed=seed, sorted_by_onset=sort)


@dataclass
class BootstrapCI:
    """Mean and 95% interval of the resampled scores.

    Arrays are [n_electrodes, n_bins, 3] per model, split axis ordered
    (train, val, test). Percentiles are nearest-rank order statistics at
    1-based ranks ceil(0.025 B) and ceil(0.975 B).
    """

    mean: dict[str, np.ndarray]
    lower: dict[str, np.ndarray]
    upper: dict[str, np.ndarray]
    n_resamples: int
    failed_resamples: tuple[int, ...] = ()

    def model_ids(self) -> list[str]:
        return list(self.mean.keys())


@dataclass
class SurvivorMask:
    """Bins whose validation score is significantly above zero.

    A bin survives iff the validation lower95 is strictly positive; a model
    with zero surviving bins at an electrode is dropped from that electrode's
    analysis.
    """

    mask: dict[str, np.ndarray]  # model_id -> bool [n_electrodes, n_bins]

    def counts(self, model_id: str) -> np.ndarray:
        return self.mask[model_id].sum(axis=1)

    def model_ids(self) -> list[str]:
        return list(self.mask.keys())


def percentile_ranks(n: int) -> tuple[int, int]:
    """0-based order-statistic indices for the 2.5th and 97.5th percentiles."""
    lo = max(int(math.ceil(0.025 * n)), 1) - 1
    hi = int(math.ceil(0.975 * n)) - 1
    return lo, hi


@dataclass
class _ModelPlan:
    """Solve plan for one model: which layers to refit and for which targets."""

    model_id: str
    # layer_id -> list of (lambda, electrode index array)
    groups: dict[str, list[tuple[float, np.ndarray]]]
    features: dict[str, np.ndarray]


def _build_plans(
    features: dict[str, dict[str, np.ndarray]],
    scores: ScoreTensor,
) -> list[_ModelPlan]:
    """Group electrodes by their selected (layer, lambda) per model."""
    plans = []
    for model_id, model_scores in scores.models.items():
        groups: dict[str, list[tuple[float, np.ndarray]]] = {}
        chosen_layer = model_scores.chosen_layer
        for layer_pos, layer in enumerate(model_scores.layers):
            electrodes = np.flatnonzero(chosen_layer == layer_pos)
            if electrodes.size == 0:
                continue
            by_lambda: list[tuple[float, np.ndarray]] = []
            lam_idx = layer.lambda_idx[electrodes]
            for li in np.unique(lam_idx):
                lam = float(model_scores.lambda_grid[li])
                by_lambda.append((lam, electrodes[lam_idx == li]))
            groups[layer.layer_id] = by_lambda
        plans.append(
            _ModelPlan(model_id=model_id, groups=groups, features=features[model_id])
        )
    return plans


def bootstrap_scores(
    features: dict[str, dict[str, np.ndarray]],
    responses: ResponseTensor,
    folds: FoldPlan,
    config: RidgeConfig,
    resamples: ResampleSet,
    scores: ScoreTensor,
    threads: int = 1,
) -> BootstrapCI:
    """Re-run the fold regressions per resample and summarize the score draws.

    The lambda and layer selected by the primary run are reused; re-selecting
    inside every resample would multiply cost by the grid size and change the
    estimand. A resample that fails numerically is recorded and skipped;
    more than 1% failures aborts the run.
    """
    n_e, n_b = responses.n_electrodes, responses.n_bins
    targets = _flatten_targets(responses)
    plans = _build_plans(features, scores)
    B = resamples.n_resamples

    boot: dict[str, np.ndarray] = {
        plan.model_id: np.zeros((B, n_e, n_b, N_SPLITS)) for plan in plans
    }
    failed: list[int] = []
    split_idx = tuple(folds.split(f) for f in range(folds.k))
    bins = np.arange(n_b)

    def run_one(b: int) -> None:
        idx = resamples.indices[b]
        y_res = targets[idx]
        try:
            # Targets are shared by every model: center them once per fold.
            fold_ys = []
            for f in range(folds.k):
                train_idx, val_idx, test_idx = split_idx[f]
                ys = (y_res[train_idx], y_res[val_idx], y_res[test_idx])
                fold_ys.append((ys, tuple(CenteredTargets(y) for y in ys)))
            for plan in plans:
                out = boot[plan.model_id][b]
                for layer_id, lam_groups in plan.groups.items():
                    P_res = plan.features[layer_id][idx]
                    for f in range(folds.k):
                        train_idx, val_idx, test_idx = split_idx[f]
                        ys, centered = fold_ys[f]
                        std = fit_standardizer(P_res[train_idx])
                        solver = FoldSolver(
                            apply_standardizer(std, P_res[train_idx]),
                            (
                                apply_standardizer(std, P_res[val_idx]),
                                apply_standardizer(std, P_res[test_idx]),
                            ),
                        )
                        for lam, electrodes in lam_groups:
                            cols = (electrodes[:, None] * n_b + bins[None, :]).ravel()
                            preds = solver.predict(solver.prepare(ys[TRAIN][:, cols]), lam)
                            for s in (TRAIN, VAL, TEST):
                                if not np.isfinite(preds[s]).all():
                                    raise NumericalError(
                                        f"non-finite bootstrap predictions "
                                        f"(model={plan.model_id}, layer={layer_id}, "
                                        f"lambda={lam}, fold={f}, resample={b})"
                                    )
                                r, _ = centered[s].subset(cols).correlate(preds[s])
                                out[electrodes[:, None], bins[None, :], s] += (
                                    r.reshape(electrodes.size, n_b) / folds.k
                                )
        except NumericalError:
            failed.append(b)

    with single_thread_blas():
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(run_one, range(B)))
        else:
            for b in range(B):
                run_one(b)

    failed_sorted = tuple(sorted(failed))
    if len(failed_sorted) > 0.01 * B:
        raise NumericalError(
            f"{len(failed_sorted)} of {B} resamples failed (>1%): rows {failed_sorted[:10]}..."
        )
    ok = np.setdiff1d(np.arange(B), np.asarray(failed_sorted, dtype=np.int64))

    mean: dict[str, np.ndarray] = {}
    lower: dict[str, np.ndarray] = {}
    upper: dict[str, np.ndarray] = {}
    lo_i, hi_i = percentile_ranks(ok.size)
    for model_id, arr in boot.items():
        good = arr[ok]
        mean[model_id] = good.mean(axis=0)
        ordered = np.sort(good, axis=0)
        lower[model_id] = ordered[lo_i]
        upper[model_id] = ordered[hi_i]
    return BootstrapCI(
        mean=mean, lower=lower, upper=upper,
        n_resamples=B, failed_resamples=failed_sorted,
    )


def survivor_mask(ci: BootstrapCI) -> SurvivorMask:
    """Keep bins whose validation lower95 is strictly above zero."""
    return SurvivorMask(
        mask={m: ci.lower[m][:, :, VAL] > 0.0 for m in ci.model_ids()}
    )
