"""Planted-truth diagnostics for the sampling analysis.

These need the true subspace and inlier set, so they are meant for tests
and experiments on generated data, not for solving.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Basis, orthonormalize, residual_norms
from .sampling import _drop_tol
from .solver import SolverConfig, solve_outliers


@dataclass(frozen=True)
class Rotation:
    """The line of span(S) closest to V*, and V* rotated to contain it."""

    line: Basis
    rotated: Basis
    sin: float
    orthogonal: bool


def rotate_toward(span: Basis, vstar: Basis) -> Rotation:
    """Rotate ``vstar`` so that it contains the line of ``span`` nearest to it.

    With ``M = Q V^T`` (Q spans S, V spans V*), the top singular pair of M
    gives the closest line ``l_S = Q^T a`` and its shadow ``l* = V^T b`` in V*.
    The remaining right singular vectors span the complement of ``l*``
    inside V*, and the rotated subspace is ``span(l_S, complement)``.
    """
    if span.dim == 0:
        raise ValueError("span(S) is trivial; no line to rotate toward")
    if vstar.dim == 0:
        raise ValueError("V* must have dimension >= 1")
    Q, V = span.vectors, vstar.vectors
    U, s, Wt = np.linalg.svd(Q @ V.T)
    a, sigma = U[:, 0], float(s[0])
    line = Q.T @ a
    line /= np.linalg.norm(line)
    complement = Wt[1:] @ V
    rotated = orthonormalize(np.vstack([line[None, :], complement]), tol=1e-12)
    sin = float(np.sqrt(max(0.0, 1.0 - min(sigma, 1.0) ** 2)))
    return Rotation(
        line=Basis(line[None, :]),
        rotated=rotated,
        sin=sin,
        orthogonal=sigma <= 1e-12,
    )


@dataclass(frozen=True)
class BadSet:
    bad: np.ndarray
    good: np.ndarray
    mass_ratio: float
    rotation: Rotation
    rotated_cost: float
    optimal_cost: float
    additive_term: float

    @property
    def violation(self) -> float:
        """How far the additive condition is violated (positive = violated)."""
        return self.rotated_cost - self.optimal_cost - self.additive_term


def diagnostics_bad_set(X, S, truth, cfg: SolverConfig) -> BadSet:
    """Inliers whose error to the rotated subspace exceeds (1 + eps/2) x optimal.

    ``mass_ratio`` is the share of ``sum ||x_i||^p`` carried by the bad set.
    """
    X = np.asarray(X, dtype=float)
    p, eps = cfg.p, cfg.epsilon
    S = np.asarray(S, dtype=np.intp)
    span = orthonormalize(X[S]) if S.size else Basis.empty(X.shape[1])
    rot = rotate_toward(span, truth.subspace)
    inl = np.asarray(truth.inlier_indices, dtype=np.intp)
    tol = _drop_tol(X)
    rw = residual_norms(X[inl], rot.rotated)
    rv = residual_norms(X[inl], truth.subspace)
    # Round-off residuals would otherwise flag exact-fit points as bad.
    rw[rw <= tol] = 0.0
    rv[rv <= tol] = 0.0
    err_w, err_v = rw ** p, rv ** p
    is_bad = err_w > (1 + eps / 2) * err_v
    norms_p = np.linalg.norm(X, axis=1) ** p
    total = float(norms_p.sum())
    bad = inl[is_bad]
    return BadSet(
        bad=bad,
        good=inl[~is_bad],
        mass_ratio=float(norms_p[bad].sum() / total) if total > 0 else 0.0,
        rotation=rot,
        rotated_cost=float(err_w.sum()),
        optimal_cost=float(err_v.sum()),
        additive_term=eps * total,
    )


def angle_track(X, trace, vstar: Basis) -> list:
    """sin of the angle between the best line of each prefix span and V*."""
    X = np.asarray(X, dtype=float)
    out, seen = [], []
    for batch in trace.rounds:
        seen.extend(int(i) for i in batch)
        span = orthonormalize(X[list(dict.fromkeys(seen))])
        out.append(rotate_toward(span, vstar).sin if span.dim else 1.0)
    return out


def diagnostics_angle_track(X, truth, cfg: SolverConfig) -> list:
    """Run :func:`solve_outliers` and record the angle after every round."""
    report = solve_outliers(X, cfg)
    return angle_track(X, report.trace, truth.subspace)


__all__ = [
    "Rotation",
    "rotate_toward",
    "BadSet",
    "diagnostics_bad_set",
    "angle_track",
    "diagnostics_angle_track",
]
