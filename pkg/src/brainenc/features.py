"""Layerwise feature matrices, sparse random projection, standardization.

High-dimensional flattened activations are projected to a
Johnson-Lindenstrauss dimension with a sparse three-valued random matrix.
The projection matrix is never stored: each column is regenerated on demand
from a counter-based generator keyed by (seed, layer, column), so the same
plan always reproduces the same matrix, bit for bit, in any execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from brainenc.blas import single_thread_blas
from brainenc.errors import ConfigurationError, DataError
from brainenc.rng import keyed_rng


@dataclass
class FeatureMatrix:
    """Features for one (model, layer): one row per event."""

    model_id: str
    layer_id: str
    F: np.ndarray  # [n_events, D]
    projected: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        self.F = np.asarray(self.F, dtype=np.float64)
        if self.F.ndim != 2:
            raise DataError(f"{self.model_id}/{self.layer_id}: features must be 2-D")

    @property
    def n_events(self) -> int:
        return self.F.shape[0]

    @property
    def dim(self) -> int:
        return self.F.shape[1]


def jl_dimension(n: int, epsilon: float) -> int:
    """Smallest p preserving pairwise squared distances of n points to (1 ± eps).

    p >= 4 ln(n) / (eps^2/2 - eps^3/3).
    """
    if n < 2:
        raise ConfigurationError("jl_dimension requires n >= 2")
    if not 0.0 < epsilon < 1.0:
        raise ConfigurationError("epsilon must lie in (0, 1)")
    bound = 4.0 * math.log(n) / (epsilon**2 / 2.0 - epsilon**3 / 3.0)
    return int(math.ceil(bound))


@dataclass(frozen=True)
class ProjectionPlan:
    """Target dimension and seed for projecting one layer.

    Identity whenever the source dimension already fits the target.
    """

    epsilon: float
    p: int
    D: int
    seed: int

    @property
    def is_identity(self) -> bool:
        return self.D <= self.p


def make_projection_plan(n_events: int, D: int, epsilon: float, seed: int) -> ProjectionPlan:
    return ProjectionPlan(epsilon=epsilon, p=jl_dimension(n_events, epsilon), D=D, seed=seed)


def _projection_column(plan: ProjectionPlan, layer_id: str, col: int) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero rows and values of one projection-matrix column.

    Entries are +/- sqrt(sqrt(D)/p) with probability 1/(2 sqrt(D)) each and
    zero otherwise.
    """
    rng = keyed_rng("srp", plan.seed, layer_id, plan.D, plan.p, col)
    u = rng.random(plan.D)
    sqrt_d = math.sqrt(plan.D)
    thr = 1.0 / (2.0 * sqrt_d)
    value = math.sqrt(sqrt_d / plan.p)
    plus = u < thr
    minus = u >= 1.0 - thr
    rows = np.flatnonzero(plus | minus)
    vals = np.where(plus[rows], value, -value)
    return rows, vals


def projection_matrix(plan: ProjectionPlan, layer_id: str) -> sp.csc_array:
    """Materialize the sparse D x p projection matrix for a plan."""
    indices: list[np.ndarray] = []
    data: list[np.ndarray] = []
    indptr = np.zeros(plan.p + 1, dtype=np.int64)
    for j in range(plan.p):
        rows, vals = _projection_column(plan, layer_id, j)
        indices.append(rows)
        data.append(vals)
        indptr[j + 1] = indptr[j] + rows.size
    return sp.csc_array(
        (
            np.concatenate(data) if data else np.empty(0),
            np.concatenate(indices) if indices else np.empty(0, dtype=np.int64),
            indptr,
        ),
        shape=(plan.D, plan.p),
    )


def sparse_projection(features: FeatureMatrix, plan: ProjectionPlan) -> FeatureMatrix:
    """Project features to plan.p dimensions; identity when D <= p."""
    if plan.D != features.dim:
        raise ConfigurationError(
            f"plan built for D={plan.D} but {features.model_id}/{features.layer_id} has D={features.dim}"
        )
    if not np.isfinite(features.F).all():
        raise DataError(f"{features.model_id}/{features.layer_id}: non-finite feature values")
    if plan.is_identity:
        return features
    # The layer key qualifies the layer by model so twin layer names in
    # different networks never share a projection matrix.
    R = projection_matrix(plan, f"{features.model_id}/{features.layer_id}")
    with single_thread_blas():
        projected = features.F @ R
    return replace(features, F=np.asarray(projected), projected=True, seed=plan.seed)


@dataclass
class Standardizer:
    """Per-column center/scale fitted on a training split only.

    Uses the population standard deviation. Exactly constant columns get a
    unit scale and map to zero.
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


def fit_standardizer(X_train: np.ndarray) -> Standardizer:
    X_train = np.asarray(X_train, dtype=np.float64)
    if X_train.ndim != 2 or X_train.shape[0] < 2:
        raise DataError("standardizer needs a 2-D matrix with at least 2 rows")
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    constant = X_train.max(axis=0) == X_train.min(axis=0)
    if constant.any():
        # Pin the center to the constant itself so the column maps to exact 0.
        mean = np.where(constant, X_train[0], mean)
        std = np.where(constant, 1.0, std)
    return Standardizer(mean=mean, std=std)


def apply_standardizer(standardizer: Standardizer, X: np.ndarray) -> np.ndarray:
    return standardizer.transform(X)
