"""Brute-force reference solvers for tiny instances.

For squared error the optimum is exact: every inlier subset of the right
size is scored by its best rank-k fit, which is exact by SVD optimality.
For other exponents each subset is fitted by IRLS, so the result is only
an upper bound on the optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice

import numpy as np

from .exceptions import BudgetExceeded
from .geometry import DROP_RTOL, Basis, _reorth, as_points, residual_norms, subset_pca_costs, top_k_subspace
from .solver import inlier_count, nearest_from_residuals

DEFAULT_BUDGET = 10 ** 6
EXACT_FIT = "exact-fit"
_CHUNK = 20000


@dataclass(frozen=True)
class OracleResult:
    best_cost: float
    best_inliers: np.ndarray
    best_subspace: Basis
    subsets_evaluated: int
    exact: bool = True

    def to_dict(self) -> dict:
        return {
            "best_cost": float(self.best_cost),
            "best_inliers": [int(i) for i in self.best_inliers],
            "best_subspace": self.best_subspace.vectors.tolist(),
            "subsets_evaluated": int(self.subsets_evaluated),
            "exact": bool(self.exact),
        }


def _check_budget(n: int, m: int, budget: int) -> int:
    total = math.comb(n, m)
    if total > budget:
        raise BudgetExceeded(f"C({n}, {m}) = {total} inlier subsets exceeds the budget of {budget}")
    return total


def _chunks(n: int, m: int):
    it = combinations(range(n), m)
    while True:
        block = list(islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def exact_optimum_p2(X, k: int, alpha: float, budget: int = DEFAULT_BUDGET) -> OracleResult:
    """Exact optimum of the trimmed squared-error objective by enumeration."""
    X = as_points(X)
    n, d = X.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}]")
    m = inlier_count(n, alpha)
    total = _check_budget(n, m, budget)
    best, best_sub = math.inf, None
    for block in _chunks(n, m):
        costs = subset_pca_costs(X, block, k)
        j = int(np.argmin(costs))
        if costs[j] < best:
            best, best_sub = float(costs[j]), block[j]
    V = top_k_subspace(X[best_sub], None, k)
    r = residual_norms(X, V)
    inl = nearest_from_residuals(r, m)
    return OracleResult(
        best_cost=float(np.sum(r[inl] ** 2)),
        best_inliers=inl,
        best_subspace=V,
        subsets_evaluated=total,
        exact=True,
    )


def _top_k_batched(G: np.ndarray, k: int) -> np.ndarray:
    # eigh sorts ascending; last k eigenvectors, shape (c, d, k).
    _, vecs = np.linalg.eigh(G)
    return vecs[:, :, -k:]


def _trimmed_batched(X: np.ndarray, V: np.ndarray, m: int, p: float) -> np.ndarray:
    R = X[None, :, :] - np.einsum("nd,cdk,cek->cne", X, V, V)
    r = np.sqrt(np.einsum("cnd,cnd->cn", R, R))
    r = np.partition(r, m - 1, axis=1)[:, :m] if m < X.shape[0] else r
    return np.sum(r ** p, axis=1)


def exact_optimum_p_general(
    X, k: int, alpha: float, p: float, iters: int = 20, budget: int = DEFAULT_BUDGET
) -> OracleResult:
    """Enumerate inlier subsets and fit each by IRLS.

    Every IRLS iterate is scored by its trimmed cost over all points and the
    best one is returned. For ``p != 2`` this is an upper bound on the
    optimum (``exact=False``); ``p == 2`` defers to :func:`exact_optimum_p2`.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 2:
        return exact_optimum_p2(X, k, alpha, budget)
    X = as_points(X)
    n, d = X.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}]")
    m = inlier_count(n, alpha)
    total = _check_budget(n, m, budget)
    outer = X[:, :, None] * X[:, None, :]
    best, best_V = math.inf, None
    for block in _chunks(n, m):
        Xs = X[block]
        V = _top_k_batched(outer[block].sum(axis=1), k)
        for it in range(iters + 1):
            costs = _trimmed_batched(X, V, m, p)
            j = int(np.argmin(costs))
            if costs[j] < best:
                best, best_V = float(costs[j]), V[j].copy()
            if it == iters:
                break
            R = Xs - np.einsum("cmd,cdk,cek->cme", Xs, V, V)
            r = np.sqrt(np.einsum("cmd,cmd->cm", R, R))
            w = np.maximum(r, 1e-12) ** (p - 2)
            V = _top_k_batched(np.einsum("cm,cmd,cme->cde", w, Xs, Xs), k)
    B = Basis(_reorth(best_V.T))
    r = residual_norms(X, B)
    inl = nearest_from_residuals(r, m)
    return OracleResult(
        best_cost=float(np.sum(r[inl] ** p)),
        best_inliers=inl,
        best_subspace=B,
        subsets_evaluated=total,
        exact=False,
    )


def delta_of_instance(X, k: int, alpha: float, p: float = 2.0, truth=None):
    """Share of the reference subspace's total p-cost carried by its inliers.

    The reference is ``truth`` (a :class:`Basis` or anything with a
    ``subspace`` attribute) or, failing that, the oracle optimum. Returns
    :data:`EXACT_FIT` when the inlier cost is zero.
    """
    X = np.asarray(X, dtype=float)
    if truth is None:
        V = exact_optimum_p_general(X, k, alpha, p).best_subspace
    else:
        V = truth if isinstance(truth, Basis) else truth.subspace
    r = residual_norms(X, V)
    r[r <= DROP_RTOL * float(np.linalg.norm(X, axis=1).max())] = 0.0
    m = inlier_count(X.shape[0], alpha)
    inl = nearest_from_residuals(r, m)
    inlier_cost = float(np.sum(r[inl] ** p))
    total = float(np.sum(r ** p))
    if inlier_cost == 0.0 or total == 0.0:
        return EXACT_FIT
    return inlier_cost / total
