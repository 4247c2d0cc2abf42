"""Built-in analytic oracle checks.

Each check recomputes a core statistic through an independent route (explicit
matrix inversion, direct summation, exhaustive step-up) and compares against
the production implementation. The CLI `selfcheck` command runs all of them
and fails the process if any disagree.
"""

from __future__ import annotations

import math

import numpy as np

from brainenc.blas import single_thread_blas
from brainenc.comparison import fdr_adjust
from brainenc.encoder import pearson, ridge_fit
from brainenc.features import (
    ProjectionPlan,
    jl_dimension,
    projection_matrix,
)
from brainenc.rng import keyed_rng


def check_ridge(n_instances: int = 20, seed: int = 0) -> tuple[bool, str]:
    """ridge_fit against explicit normal-equation inversion."""
    worst = 0.0
    with single_thread_blas():
        for i in range(n_instances):
            rng = keyed_rng("selfcheck-ridge", seed, i)
            n = int(rng.integers(5, 51))
            d = int(rng.integers(1, 11))
            P = rng.standard_normal((n, d))
            Y = rng.standard_normal((n, int(rng.integers(1, 4))))
            for lam in (0.1, 1.0, 10.0):
                expected = np.linalg.inv(P.T @ P + lam * np.eye(d)) @ (P.T @ Y)
                got = ridge_fit(P, Y, lam)
                err = np.linalg.norm(got - expected) / max(np.linalg.norm(expected), 1e-300)
                worst = max(worst, err)
    return worst <= 1e-8, f"max relative error {worst:.3e}"


def _pearson_direct(x: np.ndarray, y: np.ndarray) -> float:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    if vx == 0.0 or vy == 0.0:
        return 0.0
    return cov / math.sqrt(vx * vy)


def check_pearson(n_vectors: int = 100, seed: int = 0) -> tuple[bool, str]:
    worst = 0.0
    for i in range(n_vectors):
        rng = keyed_rng("selfcheck-pearson", seed, i)
        n = int(rng.integers(2, 40))
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        worst = max(worst, abs(pearson(x, y) - _pearson_direct(x, y)))
    return worst <= 1e-12, f"max abs error {worst:.3e}"


def bh_reference(p_values, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Loop-based Benjamini-Hochberg used only as an oracle."""
    p = list(map(float, p_values))
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        value = (p[i] * m) / rank
        running = min(running, value)
        adjusted[i] = running
    k = 0
    for rank in range(1, m + 1):
        if p[order[rank - 1]] <= (rank * alpha) / m:
            k = rank
    reject = [False] * m
    for rank in range(k):
        reject[order[rank]] = True
    return np.array(adjusted), np.array(reject)


def check_bh(n_vectors: int = 200, seed: int = 0) -> tuple[bool, str]:
    for i in range(n_vectors):
        rng = keyed_rng("selfcheck-bh", seed, i)
        m = int(rng.integers(1, 33))
        p = rng.random(m)
        adjusted, reject = fdr_adjust(p, alpha=0.05)
        exp_adj, exp_rej = bh_reference(p, alpha=0.05)
        if not (np.array_equal(adjusted, exp_adj) and np.array_equal(reject, exp_rej)):
            return False, f"mismatch on vector {i}"
    return True, f"{n_vectors} vectors match exactly"


def check_jl_dimension() -> tuple[bool, str]:
    """jl_dimension returns the minimal integer satisfying the bound."""
    for n in (2, 10, 100, 1000, 50000):
        for eps in (0.05, 0.1, 0.2, 0.5, 0.9):
            p = jl_dimension(n, eps)
            bound = 4.0 * math.log(n) / (eps**2 / 2.0 - eps**3 / 3.0)
            if p < bound or (p - 1) >= bound:
                return False, f"not minimal for n={n}, eps={eps}: p={p}, bound={bound}"
    return True, "minimal integer bound on all spot checks"


def check_projection_entries(seed: int = 0) -> tuple[bool, str]:
    """Empirical entry frequencies of R match the three-valued law."""
    D, p = 400, 50
    plan = ProjectionPlan(epsilon=0.5, p=p, D=D, seed=seed)
    R = projection_matrix(plan, "selfcheck-layer").toarray()
    value = math.sqrt(math.sqrt(D) / p)
    thr = 1.0 / (2.0 * math.sqrt(D))
    levels = np.unique(np.round(R, 12))
    if not set(levels).issubset({-round(value, 12), 0.0, round(value, 12)}):
        return False, f"unexpected entry levels {levels}"
    frac_plus = float((R > 0).mean())
    frac_minus = float((R < 0).mean())
    tol = 4.0 * math.sqrt(thr / (D * p))  # ~4 standard errors
    ok = abs(frac_plus - thr) < tol and abs(frac_minus - thr) < tol
    return ok, f"P(+)={frac_plus:.5f}, P(-)={frac_minus:.5f}, target {thr:.5f}"


ALL_CHECKS = (
    ("ridge-oracle", check_ridge),
    ("pearson-oracle", check_pearson),
    ("bh-oracle", check_bh),
    ("jl-dimension", check_jl_dimension),
    ("projection-entries", check_projection_entries),
)


def run_selfcheck(verbose_print=print) -> bool:
    all_ok = True
    for name, check in ALL_CHECKS:
        ok, detail = check()
        verbose_print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
        all_ok &= ok
    return all_ok
