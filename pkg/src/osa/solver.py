"""Weak-coreset construction for subspace approximation with outliers.

The objective for a k-dim subspace V is the trimmed cost: the sum of
``d(x_i, V)^p`` over the ``floor((1 - alpha) n)`` points nearest to V.
:func:`solve_outliers` grows an index set S by adaptive residual sampling
so that ``span(S)`` contains a near-optimal k-dim subspace, then extracts
one with trimmed alternating minimization.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .geometry import (
    AffinePlacement,
    Basis,
    _reorth,
    as_points,
    residual_norms,
    subset_pca_costs,
    top_k_subspace,
)
from .losses import LossFunction, PthPower
from .sampling import SampleTrace, adaptive_init, adaptive_round, derive_rng, residual_mass

EXACT_FIT_RTOL = 1e-12
_EXTRACT_KEY = 1_000_003


def inlier_count(n: int, alpha: float) -> int:
    """``floor((1 - alpha) * n)``, robust to float round-off."""
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    m = int(math.floor((1.0 - alpha) * n + 1e-9))
    if m < 1:
        raise ValueError(f"no inliers left: floor((1 - {alpha}) * {n}) = 0")
    return m


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the sampling solver.

    Unset sizes are filled from the asymptotic formulas with the constants
    ``c1`` (batch size) and ``c2`` (per-round repetitions):

    * ``rounds_T = ceil(log2(1/delta)) + 1``
    * ``batch_size = ceil(c1 * p^2 * k / eps^2 * ln(k / eps))``
    * ``trials = ceil(c2 * ln(rounds_T)) + 3``
    """

    k: int = 1
    p: float = 2.0
    alpha: float = 0.0
    epsilon: float = 0.3
    delta: float = 0.1
    rounds_T: Optional[int] = None
    inner_batches: Optional[int] = None
    batch_size: Optional[int] = None
    trials: Optional[int] = None
    extraction_iters: int = 50
    extraction_starts: int = 10
    exhaustive_budget: int = 2000
    seed: int = 0
    c1: float = 4.0
    c2: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.delta <= 1 - self.alpha + 1e-12:
            raise ValueError(f"delta must lie in (0, 1 - alpha] = (0, {1 - self.alpha:g}]")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        fill = object.__setattr__
        if self.rounds_T is None:
            fill(self, "rounds_T", math.ceil(math.log2(1.0 / self.delta)) + 1)
        if self.inner_batches is None:
            fill(self, "inner_batches", self.k)
        if self.batch_size is None:
            k, e = self.k, self.epsilon
            fill(self, "batch_size", math.ceil(self.c1 * self.p ** 2 * k / e ** 2 * math.log(k / e)))
        if self.trials is None:
            fill(self, "trials", math.ceil(self.c2 * math.log(max(self.rounds_T, 1))) + 3)
        for name in ("rounds_T", "inner_batches", "batch_size", "trials", "extraction_iters"):
            if getattr(self, name) < (0 if name == "rounds_T" else 1):
                raise ValueError(f"{name} is out of range")

    def max_coreset_size(self) -> int:
        return self.k + self.rounds_T * self.inner_batches * self.batch_size * self.trials


@dataclass
class SolveReport:
    trace: SampleTrace
    subspace: Basis
    span: Basis
    trimmed_cost_k: float
    trimmed_cost_span: float
    inlier_indices: np.ndarray
    per_round_residual_mass: list
    wall_time_ms: float = 0.0
    placement: Optional[AffinePlacement] = None
    extras: dict = field(default_factory=dict)

    @property
    def span_dim(self) -> int:
        return self.span.dim

    def result_dict(self) -> dict:
        """JSON-ready result block (timing excluded)."""
        out = {
            "coreset_indices": [int(i) for i in self.trace.all],
            "coreset_size": self.trace.size,
            "rounds": [[int(i) for i in r] for r in self.trace.rounds],
            "span_dim": self.span_dim,
            "subspace": self.subspace.vectors.tolist(),
            "subspace_dim": self.subspace.dim,
            "trimmed_cost_k": float(self.trimmed_cost_k),
            "trimmed_cost_span": float(self.trimmed_cost_span),
            "inlier_indices": [int(i) for i in self.inlier_indices],
            "per_round_residual_mass": [float(m) for m in self.per_round_residual_mass],
        }
        if self.placement is not None:
            out["origin"] = self.placement.origin.tolist()
        if self.extras:
            out["extras"] = {k: _jsonable(v) for k, v in sorted(self.extras.items())}
        return out


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def nearest_from_residuals(r, m: int) -> np.ndarray:
    """Sorted indices of the ``m`` smallest residuals; ties go to the smaller index."""
    order = np.argsort(np.asarray(r), kind="stable")
    return np.sort(order[:m])


def nearest_inliers(X, B: Basis, alpha: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    m = inlier_count(X.shape[0], alpha)
    return nearest_from_residuals(residual_norms(X, B), m)


def trimmed_from_residuals(r, m: int, loss: LossFunction) -> float:
    r = np.asarray(r, dtype=float)
    return float(loss(r[nearest_from_residuals(r, m)]).sum())


def trimmed_cost(X, B: Basis, alpha: float, p: float = 2.0, loss: Optional[LossFunction] = None) -> float:
    """Sum of ``d(x_i, B)^p`` (or ``loss``) over the nearest ``(1-alpha) n`` points."""
    X = np.asarray(X, dtype=float)
    m = inlier_count(X.shape[0], alpha)
    return trimmed_from_residuals(residual_norms(X, B), m, loss or PthPower(p))


def grow_rounds(X, trace: SampleTrace, cfg: SolverConfig, loss: LossFunction, seed=None):
    """Run the adaptive rounds on top of ``trace``.

    Each round draws ``inner_batches`` sequential batches; the round is
    repeated ``trials`` times from the same starting trace and the attempt
    leaving the least residual mass is kept.

    Returns ``(trace, masses)`` where ``masses[t]`` is the residual mass
    after round t (``masses[0]`` is the mass of the starting span).
    """
    seed = cfg.seed if seed is None else seed
    mass0 = residual_mass(X, trace.basis, loss=loss)
    masses = [mass0]
    if trace.degenerate and mass0 == 0.0:
        return trace, masses
    for t in range(1, cfg.rounds_T + 1):
        if masses[-1] <= EXACT_FIT_RTOL * mass0:
            break
        best, best_mass = None, math.inf
        for rep in range(cfg.trials):
            cand = trace
            start = len(cand.rounds)
            for j in range(cfg.inner_batches):
                cand = adaptive_round(X, cand, cfg.batch_size, seed=derive_rng(seed, t, rep, j), loss=loss)
                if cand.degenerate:
                    break
            mass = residual_mass(X, cand.basis, loss=loss)
            if mass < best_mass:
                best, best_mass = cand.collapse(start), mass
            if mass == 0.0:
                break
        trace = best
        masses.append(best_mass)
    return trace, masses


def _top_k_rows(Y, w, k: int) -> np.ndarray:
    # Top-k eigenvectors of the weighted Gram matrix, as rows.
    G = (Y * w[:, None]).T @ Y if w is not None else Y.T @ Y
    _, vecs = np.linalg.eigh(G)
    return vecs[:, ::-1][:, :k].T


def extract_k_subspace(X, span: Basis, cfg: SolverConfig, loss: Optional[LossFunction] = None) -> Basis:
    """Pick a k-dim subspace inside ``span`` with small trimmed cost.

    Alternating minimization: fit (weighted) top-k directions on the current
    inlier set, then re-trim to the nearest points. Non-quadratic losses use
    IRLS weights. Several deterministic starts are tried; when the number of
    inlier subsets is within ``cfg.exhaustive_budget`` and the loss is
    quadratic, all subsets are also enumerated inside the span.
    """
    X = np.asarray(X, dtype=float)
    loss = loss or PthPower(cfg.p)
    k = cfg.k
    if span.dim <= k:
        return span
    n = X.shape[0]
    m = inlier_count(n, cfg.alpha)
    Y = X @ span.vectors.T
    off2 = residual_norms(X, span) ** 2

    def full_residuals(Vc):
        R = Y - (Y @ Vc.T) @ Vc
        return np.sqrt(np.einsum("ij,ij->i", R, R) + off2)

    starts = [np.arange(n)]
    if cfg.alpha > 0:
        if off2.max() > 0:
            starts.append(nearest_from_residuals(off2, m))
        rng = derive_rng(cfg.seed, _EXTRACT_KEY)
        for _ in range(cfg.extraction_starts):
            pick = rng.choice(n, size=min(k, n), replace=False)
            Vc = _top_k_rows(Y[pick], None, k)
            starts.append(nearest_from_residuals(full_residuals(Vc), m))

    quadratic = isinstance(loss, PthPower) and loss.p == 2
    best_cost, best_V = math.inf, None
    seen = set()
    for inl in starts:
        key = inl.tobytes()
        if key in seen:
            continue
        seen.add(key)
        w = np.ones(n)
        prev = math.inf
        for it in range(cfg.extraction_iters):
            if not np.any(w[inl] > 0):
                break
            # Quadratic steps depend only on the inlier set, so a set reached
            # from an earlier start has already been followed to its end.
            if quadratic and it:
                key = inl.tobytes()
                if key in seen:
                    break
                seen.add(key)
            Vc = _top_k_rows(Y[inl], w[inl], k)
            r = full_residuals(Vc)
            new_inl = nearest_from_residuals(r, m)
            cost = float(loss(r[new_inl]).sum())
            if cost < best_cost:
                best_cost, best_V = cost, Vc
            w = loss.irls_weight(r)
            stable = np.array_equal(new_inl, inl)
            if stable and (quadratic or prev - cost <= 1e-12 * max(cost, 1e-300)):
                break
            inl, prev = new_inl, cost

    if quadratic and math.comb(n, m) <= cfg.exhaustive_budget:
        subsets = np.array(list(combinations(range(n), m)), dtype=np.intp)
        costs = subset_pca_costs(Y, subsets, k, offsets=off2)
        Vc = top_k_subspace(Y[subsets[int(np.argmin(costs))]], None, k).vectors
        if Vc.shape[0]:
            r = full_residuals(Vc)
            cost = trimmed_from_residuals(r, m, loss)
            if cost < best_cost:
                best_cost, best_V = cost, Vc

    if best_V is None:
        return span
    return Basis(_reorth(best_V @ span.vectors))


def _finish(X, trace, masses, cfg, loss, t0, extras=None) -> SolveReport:
    span = trace.basis
    m = inlier_count(X.shape[0], cfg.alpha)
    cost_span = trimmed_from_residuals(residual_norms(X, span), m, loss)
    V = extract_k_subspace(X, span, cfg, loss)
    r = residual_norms(X, V)
    inliers = nearest_from_residuals(r, m)
    cost_k = float(loss(r[inliers]).sum())
    return SolveReport(
        trace=trace,
        subspace=V,
        span=span,
        trimmed_cost_k=cost_k,
        trimmed_cost_span=cost_span,
        inlier_indices=inliers,
        per_round_residual_mass=masses,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
        extras=extras or {},
    )


def solve_outliers(X, cfg: SolverConfig, loss: Optional[LossFunction] = None) -> SolveReport:
    """Weak coreset by residual-weighted initialization plus adaptive rounds.

    ``trimmed_cost_span`` is the bi-criteria cost of the whole span;
    ``trimmed_cost_k`` is the cost of the k-dim subspace extracted from it.
    """
    t0 = time.perf_counter()
    X = as_points(X)
    if cfg.k > X.shape[1]:
        raise ValueError(f"k={cfg.k} exceeds the ambient dimension {X.shape[1]}")
    loss = loss or PthPower(cfg.p)
    inlier_count(X.shape[0], cfg.alpha)
    trace = adaptive_init(X, cfg.k, cfg.p, derive_rng(cfg.seed, 0, 0, 0), loss)
    trace, masses = grow_rounds(X, trace, cfg, loss)
    return _finish(X, trace, masses, cfg, loss, t0)


def line_solver(X, cfg: SolverConfig) -> SolveReport:
    """Best line (k=1) under squared error with outliers.

    Starts from a single point drawn by squared-length sampling, then runs
    the adaptive rounds with squared residual weights.
    """
    if cfg.k != 1 or cfg.p != 2:
        raise ValueError("line_solver requires k=1 and p=2")
    return solve_outliers(X, cfg)
