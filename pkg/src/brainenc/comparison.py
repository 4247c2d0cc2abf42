"""Per-electrode model comparison with FDR-corrected significance.

An electrode's models are filtered by the survivor mask, ranked by mean
bootstrapped validation score over surviving bins, and the top two are tested
by a second-order bootstrap over their shared surviving time bins. An
electrode with exactly one model holding enough surviving bins needs no test:
that model wins by default. Raw p-values are adjusted battery-wide by the
Benjamini-Hochberg step-up procedure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from brainenc.bootstrap import BootstrapCI, SurvivorMask
from brainenc.encoder import TEST, VAL
from brainenc.errors import ConfigurationError, DataError
from brainenc.rng import keyed_rng


class ModalityClass(enum.Enum):
    MULTIMODAL_TRAINED = "multimodal_trained"
    MULTIMODAL_ARCH = "multimodal_architectural"
    UNIMODAL_LANGUAGE = "unimodal_language"
    UNIMODAL_VISION = "unimodal_vision"
    LINEAR_INTEGRATION = "linear_integration"


MULTIMODAL_CLASSES = frozenset(
    {ModalityClass.MULTIMODAL_TRAINED, ModalityClass.MULTIMODAL_ARCH}
)
#: Classes whose win counts as evidence of multimodality in the weak/strict tests.
INTEGRATION_CLASSES = MULTIMODAL_CLASSES | {ModalityClass.LINEAR_INTEGRATION}


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    modality_class: ModalityClass
    trained: bool

    def __post_init__(self) -> None:
        if self.modality_class is ModalityClass.MULTIMODAL_TRAINED and not self.trained:
            raise DataError(
                f"{self.model_id}: a randomly initialized contrastive model must be "
                "supplied as unimodal (training is what makes it multimodal)"
            )


class VerdictKind(enum.Enum):
    DEFAULT_WINNER = "default_winner"
    BOOTSTRAP_WIN = "bootstrap_win"
    NO_DECISION = "no_decision"


@dataclass(frozen=True)
class ComparisonConfig:
    """Knobs shared by every battery and pairwise comparison."""

    alpha: float = 0.05
    min_bins: int = 10
    n_bin_resamples: int = 1000
    seed: int = 0


@dataclass
class ComparisonVerdict:
    """Outcome of one electrode's battery comparison."""

    electrode_id: int
    kind: VerdictKind
    winner: str | None = None
    runner_up: str | None = None
    diff: float | None = None
    p_raw: float | None = None
    p_adj: float | None = None


def rank_models(
    ci: BootstrapCI,
    mask: SurvivorMask,
    electrode_index: int,
    model_ids: list[str] | None = None,
) -> list[tuple[str, float]]:
    """Models with any surviving bin, best mean validation score first.

    The score is the bootstrapped mean validation r averaged over that model's
    own surviving bins; ties break lexicographically on model_id.
    """
    candidates = model_ids if model_ids is not None else mask.model_ids()
    ranked = []
    for model_id in candidates:
        bins = mask.mask[model_id][electrode_index]
        if not bins.any():
            continue
        score = float(ci.mean[model_id][electrode_index, bins, VAL].mean())
        ranked.append((model_id, score))
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked


def default_winner(
    mask: SurvivorMask,
    electrode_index: int,
    model_ids: list[str] | None = None,
    min_bins: int = 10,
) -> str | None:
    """The single model with >= min_bins surviving bins, if exactly one exists."""
    candidates = model_ids if model_ids is not None else mask.model_ids()
    eligible = [
        m for m in candidates
        if int(mask.mask[m][electrode_index].sum()) >= min_bins
    ]
    return eligible[0] if len(eligible) == 1 else None


def timebin_bootstrap(
    top_scores: np.ndarray,
    second_scores: np.ndarray,
    shared_bins: np.ndarray,
    n_resamples: int,
    rng: np.random.Generator,
    min_bins: int = 10,
) -> tuple[float, float]:
    """One-sided p-value for top > second over resampled shared time bins.

    Resamples the shared surviving bins with replacement and counts resamples
    where the mean score difference fails to favor the top model. Uses the
    add-one estimator (1 + #nonpositive) / (B + 1). Returns (p, mean diff over
    the shared bins).
    """
    shared_bins = np.asarray(shared_bins)
    if shared_bins.size < min_bins:
        raise ConfigurationError(
            f"need at least {min_bins} shared surviving bins, got {shared_bins.size}"
        )
    top = np.asarray(top_scores, dtype=np.float64)[shared_bins]
    second = np.asarray(second_scores, dtype=np.float64)[shared_bins]
    draws = rng.integers(0, shared_bins.size, size=(n_resamples, shared_bins.size))
    diffs = top[draws].mean(axis=1) - second[draws].mean(axis=1)
    p = (1.0 + float(np.count_nonzero(diffs <= 0.0))) / (n_resamples + 1.0)
    return p, float(top.mean() - second.mean())


def fdr_adjust(p_values, alpha: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Benjamini-Hochberg step-up: adjusted p-values and the rejection set.

    Adjusted values use the standard monotone cumulative-minimum construction;
    rejections are every rank up to the largest k with p_(k) <= k*alpha/m.
    """
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1:
        raise DataError("p_values must be 1-D")
    if p.size == 0:
        return np.empty(0), np.empty(0, dtype=bool)
    if np.any(p < 0.0) or np.any(p > 1.0) or not np.isfinite(p).all():
        raise DataError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    ranks = np.arange(1, m + 1, dtype=np.float64)
    scaled = (ranked * m) / ranks
    adj_ranked = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    adjusted = np.empty(m, dtype=np.float64)
    adjusted[order] = adj_ranked
    passes = ranked <= (ranks * alpha) / m
    k = int(np.flatnonzero(passes)[-1]) + 1 if passes.any() else 0
    reject = np.zeros(m, dtype=bool)
    reject[order[:k]] = True
    return adjusted, reject


def compare_at_electrode(
    ci: BootstrapCI,
    mask: SurvivorMask,
    e_index: int,
    electrode_id: int,
    candidates: list[str],
    cfg: ComparisonConfig,
    battery_tag: str = "battery",
) -> tuple[ComparisonVerdict, str | None]:
    """One electrode's comparison, before any FDR adjustment.

    Returns the verdict plus the top-ranked model of a tested pair (None when
    no test ran). A tested verdict starts as NO_DECISION with p_raw set;
    apply_battery_fdr upgrades it once the whole family's p-values exist.
    """
    dw = default_winner(mask, e_index, candidates, cfg.min_bins)
    if dw is not None:
        return ComparisonVerdict(electrode_id, VerdictKind.DEFAULT_WINNER, winner=dw), None
    ranking = rank_models(ci, mask, e_index, candidates)
    if len(ranking) < 2:
        return ComparisonVerdict(electrode_id, VerdictKind.NO_DECISION), None
    top, second = ranking[0][0], ranking[1][0]
    shared = np.flatnonzero(mask.mask[top][e_index] & mask.mask[second][e_index])
    if shared.size < cfg.min_bins:
        return ComparisonVerdict(electrode_id, VerdictKind.NO_DECISION), None
    rng = keyed_rng("timebin", battery_tag, cfg.seed, electrode_id)
    p_raw, diff = timebin_bootstrap(
        ci.mean[top][e_index, :, TEST],
        ci.mean[second][e_index, :, TEST],
        shared,
        cfg.n_bin_resamples,
        rng,
        cfg.min_bins,
    )
    verdict = ComparisonVerdict(
        electrode_id,
        VerdictKind.NO_DECISION,
        runner_up=second,
        diff=diff,
        p_raw=p_raw,
    )
    return verdict, top


def apply_battery_fdr(
    tested: list[tuple[ComparisonVerdict, str]], alpha: float
) -> None:
    """FDR-adjust tested verdicts in place; significant ones become wins."""
    if not tested:
        return
    raw = np.array([v.p_raw for v, _ in tested])
    adjusted, reject = fdr_adjust(raw, alpha)
    for j, (verdict, top) in enumerate(tested):
        verdict.p_adj = float(adjusted[j])
        if reject[j]:
            verdict.kind = VerdictKind.BOOTSTRAP_WIN
            verdict.winner = top


def compare_battery(
    ci: BootstrapCI,
    mask: SurvivorMask,
    electrode_ids: list[int],
    cfg: ComparisonConfig,
    model_ids: list[str] | None = None,
    battery_tag: str = "battery",
) -> list[ComparisonVerdict]:
    """Compare models at every electrode and FDR-adjust across the battery.

    The second-order bootstrap compares the bootstrapped mean test scores of
    the top two validation-ranked models over their shared surviving bins.
    The winner of a tested electrode is declared only when the adjusted
    p-value clears alpha.
    """
    candidates = model_ids if model_ids is not None else mask.model_ids()
    verdicts: list[ComparisonVerdict] = []
    tested: list[tuple[ComparisonVerdict, str]] = []
    for e_index, electrode_id in enumerate(electrode_ids):
        verdict, top = compare_at_electrode(
            ci, mask, e_index, electrode_id, candidates, cfg, battery_tag
        )
        verdicts.append(verdict)
        if top is not None:
            tested.append((verdict, top))
    apply_battery_fdr(tested, cfg.alpha)
    return verdicts
