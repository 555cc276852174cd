"""Affine subspace approximation with outliers (squared error only).

A uniform sample T is drawn and every nonempty part S of every bipartition
of T is tried as a guess for the inlier part: the data are shifted by the
mean of S and handed to the linear solver.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import BudgetExceeded
from .geometry import AffinePlacement, as_points, residual_norms
from .sampling import derive_rng, derive_seed
from .solver import SolveReport, SolverConfig, solve_outliers

MAX_SAMPLE = 24
_SAMPLE_KEY = 3_000_017


@dataclass(frozen=True)
class AffineConfig:
    """``sample_size`` defaults to ``ceil(2 / eta^2 / (1 - alpha))``; the inner solver must use p=2."""

    eta: float
    inner: SolverConfig
    sample_size: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.inner.p != 2:
            raise ValueError("affine approximation is defined for squared error (p=2) only")
        if self.sample_size is None:
            size = math.ceil(2.0 / self.eta ** 2 / (1.0 - self.inner.alpha) - 1e-9)
            object.__setattr__(self, "sample_size", size)
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")


def affine_residuals(X, placement: AffinePlacement) -> np.ndarray:
    return residual_norms(np.asarray(X, dtype=float) - placement.origin, placement.basis)


def parallel_axis_check(X, V: AffinePlacement, I) -> tuple:
    """Both sides of the parallel-axis identity over the points ``I``.

    ``lhs = sum d(x_i, V)^2``; ``rhs = sum d(x_i, V_mu)^2 + |I| d(V, V_mu)^2``
    where ``V_mu`` is the translate of V through the mean of those points.
    """
    X = np.asarray(X, dtype=float)
    I = np.asarray(I, dtype=np.intp)
    if I.size == 0:
        raise ValueError("I must be nonempty")
    P = X[I]
    mu = P.mean(axis=0)
    lhs = float(np.sum(affine_residuals(P, V) ** 2))
    shifted = AffinePlacement(mu, V.basis)
    gap = float(residual_norms((mu - V.origin)[None, :], V.basis)[0])
    rhs = float(np.sum(affine_residuals(P, shifted) ** 2)) + I.size * gap ** 2
    return lhs, rhs


def diameter(P) -> float:
    P = np.asarray(P, dtype=float)
    if P.shape[0] < 2:
        return 0.0
    return float(pdist(P).max())


def sample_mean_trial(I_points, m: int, seed=None) -> tuple:
    """Deviation of an i.i.d. uniform sample mean from the full mean.

    Returns ``(||mu_S - mu_I||, eta * D)`` with ``eta = sqrt(2 / m)`` and D
    the diameter of the point set.
    """
    P = np.asarray(I_points, dtype=float)
    if m < 1:
        raise ValueError("m must be >= 1")
    idx = np.random.default_rng(seed).integers(0, P.shape[0], size=m)
    dev = float(np.linalg.norm(P[idx].mean(axis=0) - P.mean(axis=0)))
    return dev, math.sqrt(2.0 / m) * diameter(P)


def affine_solve(X, cfg: AffineConfig) -> SolveReport:
    """Best affine placement over all bipartitions of a uniform sample.

    The returned report is the inner linear solve of the winning part, with
    ``placement`` set to ``(mu_S, subspace)`` and costs measured from it.
    """
    t0 = time.perf_counter()
    X = as_points(X)
    n = X.shape[0]
    size = cfg.sample_size
    if size > MAX_SAMPLE:
        raise BudgetExceeded(
            f"sample of {size} points needs 2^{size} partitions (cap {MAX_SAMPLE}); use a larger eta"
        )
    rng = derive_rng(cfg.inner.seed, _SAMPLE_KEY)
    T = rng.choice(n, size=size, replace=size > n)
    best, best_cost, best_mask = None, math.inf, 0
    for mask in range(1, 1 << size):
        part = T[[j for j in range(size) if mask >> j & 1]]
        mu = X[part].mean(axis=0)
        inner = replace(cfg.inner, seed=derive_seed(cfg.inner.seed, mask))
        rep = solve_outliers(X - mu, inner)
        if rep.trimmed_cost_k < best_cost:
            best, best_cost, best_mask, best_mu = rep, rep.trimmed_cost_k, mask, mu
    best.placement = AffinePlacement(best_mu, best.subspace)
    best.extras.update(
        sample_indices=[int(i) for i in T],
        best_part=[int(T[j]) for j in range(size) if best_mask >> j & 1],
        partitions_evaluated=(1 << size) - 1,
    )
    best.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return best
