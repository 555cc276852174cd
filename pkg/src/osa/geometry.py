"""Dense linear-algebra kernels.

Point sets are plain ``(n, d)`` float arrays (one point per row, row order is
identity). Subspaces are :class:`Basis` objects holding orthonormal row
vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch

TAU_ORTH = 1e-10
DROP_RTOL = 1e-10


def as_points(X) -> np.ndarray:
    """Validate and return ``X`` as a read-only ``(n, d)`` float array."""
    X = np.array(X, dtype=float, copy=True)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"expected a non-empty (n, d) point array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("point set contains non-finite entries")
    X.setflags(write=False)
    return X


@dataclass(frozen=True, eq=False)
class Basis:
    """Orthonormal basis of a linear subspace of R^d, stored as rows."""

    vectors: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.vectors, dtype=float)
        if V.ndim != 2 or V.shape[1] < 1:
            raise ValueError(f"basis vectors must be (m, d) with d >= 1, got {V.shape}")
        if V.shape[0] > V.shape[1]:
            raise ValueError("more basis vectors than ambient dimensions")
        if V.shape[0]:
            err = np.abs(V @ V.T - np.eye(V.shape[0])).max()
            if err > TAU_ORTH:
                raise ValueError(f"basis is not orthonormal (max deviation {err:.3g})")
        V = V.copy()
        V.setflags(write=False)
        object.__setattr__(self, "vectors", V)

    @classmethod
    def empty(cls, d: int) -> "Basis":
        return cls(np.zeros((0, d)))

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def ambient(self) -> int:
        return self.vectors.shape[1]

    def projector(self) -> np.ndarray:
        return self.vectors.T @ self.vectors

    def __repr__(self):
        return f"Basis(dim={self.dim}, ambient={self.ambient})"


@dataclass(frozen=True, eq=False)
class AffinePlacement:
    """Affine subspace ``origin + span(basis)``."""

    origin: np.ndarray
    basis: Basis

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).ravel()
        if o.shape[0] != self.basis.ambient:
            raise DimensionMismatch("origin and basis live in different dimensions")
        if not np.all(np.isfinite(o)):
            raise ValueError("origin must be finite")
        o = o.copy()
        o.setflags(write=False)
        object.__setattr__(self, "origin", o)


def _check_dim(d_points: int, B: Basis):
    if d_points != B.ambient:
        raise DimensionMismatch(f"points have dimension {d_points}, basis lives in R^{B.ambient}")


def extend_basis(B: Basis, vectors, tol: float | None = None) -> Basis:
    """Grow ``B`` by the components of ``vectors`` orthogonal to it.

    Modified Gram-Schmidt with one re-orthogonalization pass. A vector whose
    residual norm is at most ``tol`` is dropped; the default threshold is
    ``1e-10 * max input norm``.
    """
    W = np.asarray(vectors, dtype=float)
    if W.ndim == 1:
        W = W[None, :]
    if W.size == 0:
        return B
    _check_dim(W.shape[1], B)
    d = B.ambient
    if tol is None:
        tol = DROP_RTOL * float(np.linalg.norm(W, axis=1).max())
    if B.dim == d:
        return B
    Q = B.vectors
    # Bulk projection against the existing basis, twice.
    R = W
    if Q.shape[0]:
        R = R - (R @ Q.T) @ Q
        R = R - (R @ Q.T) @ Q
    new = []
    for r in R:
        if new:
            N = np.array(new)
            r = r - (N @ r) @ N
            r = r - (N @ r) @ N
        nr = np.linalg.norm(r)
        if nr <= tol or nr == 0.0:
            continue
        # A short residual of a long vector carries relative error ~eps*|w|/nr;
        # one more pass on the unit vector restores orthogonality.
        u = r / nr
        for M in (Q, np.array(new).reshape(-1, d)):
            if M.shape[0]:
                u = u - (M @ u) @ M
        new.append(u / np.linalg.norm(u))
        if Q.shape[0] + len(new) == d:
            break
    if not new:
        return B
    return Basis(np.vstack([Q, np.array(new)]))


def orthonormalize(vectors, tol: float | None = None, d: int | None = None) -> Basis:
    """Orthonormal basis of ``span(vectors)``; dependent vectors are dropped.

    An empty input yields the trivial subspace of R^d (``d`` must then be
    given, or inferable from a ``(0, d)`` array).
    """
    if not isinstance(vectors, np.ndarray):
        lengths = {len(v) for v in vectors}
        if len(lengths) > 1:
            raise DimensionMismatch(f"vectors have differing dimensions {sorted(lengths)}")
    W = np.asarray(vectors, dtype=float)
    if W.ndim == 1:
        W = W[None, :] if W.size else W.reshape(0, d or 0)
    if W.shape[0] == 0:
        d = d or W.shape[1]
        if not d:
            raise ValueError("cannot infer the ambient dimension of an empty vector list")
        return Basis.empty(d)
    if d is not None and W.shape[1] != d:
        raise DimensionMismatch(f"vectors have dimension {W.shape[1]}, expected {d}")
    return extend_basis(Basis.empty(W.shape[1]), W, tol)


def residual_norms(X, B: Basis) -> np.ndarray:
    """Distances ``||x_i - B^T B x_i||`` for every row of ``X``."""
    X = np.asarray(X, dtype=float)
    _check_dim(X.shape[1], B)
    if B.dim == 0:
        return np.linalg.norm(X, axis=1)
    if B.dim == B.ambient:
        return np.zeros(X.shape[0])
    R = X - (X @ B.vectors.T) @ B.vectors
    return np.linalg.norm(R, axis=1)


def residual_norm(x, B: Basis) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(residual_norms(x[None, :], B)[0])


def project_onto(X, B: Basis) -> np.ndarray:
    """Coordinates of each point in the basis, shape ``(n, dim)``."""
    X = np.asarray(X, dtype=float)
    _check_dim(X.shape[1], B)
    return X @ B.vectors.T


def top_k_subspace(X, weights=None, k: int = 1) -> Basis:
    """Best-fit k-dim subspace for sum of (weighted) squared distances.

    The returned basis has dimension ``min(k, rank)``.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}], got {k}")
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (X.shape[0],) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite, non-negative, one per point")
        X = X * np.sqrt(w)[:, None]
    if X.shape[0] == 0:
        return Basis.empty(d)
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return Basis.empty(d)
    rank = int(np.sum(s > s[0] * max(X.shape) * np.finfo(float).eps))
    m = min(k, rank)
    return Basis(_reorth(Vt[:m]))


def _reorth(V: np.ndarray) -> np.ndarray:
    # SVD rows are orthonormal to ~1e-15; a QR pass keeps them well inside TAU_ORTH.
    if V.shape[0] == 0:
        return V
    Q, R = np.linalg.qr(V.T)
    return (Q * np.sign(np.diag(R))).T


def sin_angle(line: Basis, V: Basis) -> float:
    """|sin| of the angle between a line and a subspace."""
    if line.dim != 1:
        raise ValueError(f"expected a one-dimensional basis, got dim {line.dim}")
    _check_dim(line.ambient, V)
    return float(min(1.0, residual_norm(line.vectors[0], V)))


def subspace_contains(B: Basis, C: Basis, tol: float = 1e-8) -> bool:
    """True if span(C) is contained in span(B)."""
    if C.dim == 0:
        return True
    return bool(residual_norms(C.vectors, B).max() <= tol)


def subset_pca_costs(Y, subsets, k: int, offsets=None, chunk: int = 4096) -> np.ndarray:
    """Best rank-k squared-error cost of each row subset of ``Y``.

    ``subsets`` is an ``(c, m)`` integer array. For each row ``S`` the value
    is ``min over k-dim V of sum_{i in S} d(y_i, V)^2`` (plus ``offsets[S]``
    if given), computed from the eigenvalues of the subset Gram matrix.
    """
    Y = np.asarray(Y, dtype=float)
    subsets = np.asarray(subsets, dtype=np.intp)
    c, m = subsets.shape
    d = Y.shape[1]
    out = np.empty(c)
    use_outer = d <= m
    if use_outer:
        outer = Y[:, :, None] * Y[:, None, :]
        drop = d - k
    else:
        K = Y @ Y.T
        drop = m - k
    for lo in range(0, c, chunk):
        sub = subsets[lo:lo + chunk]
        if use_outer:
            G = outer[sub].sum(axis=1)
        else:
            G = K[sub[:, :, None], sub[:, None, :]]
        if drop <= 0:
            out[lo:lo + chunk] = 0.0
            continue
        ev = np.linalg.eigvalsh(G)
        out[lo:lo + chunk] = np.clip(ev[:, :drop], 0.0, None).sum(axis=1)
    if offsets is not None:
        out += np.asarray(offsets, dtype=float)[subsets].sum(axis=1)
    return out
