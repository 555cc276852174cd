"""Seeded weighted sampling and the adaptive residual-sampling rounds."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .exceptions import DegenerateWeights
from .geometry import DROP_RTOL, Basis, extend_basis, residual_norms

WEIGHT_FLOOR = 1e-300

Loss = Callable[[np.ndarray], np.ndarray]


def derive_rng(seed, *keys) -> np.random.Generator:
    """Independent, reproducible stream for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def derive_seed(seed, *keys) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _drop_tol(X) -> float:
    return DROP_RTOL * float(np.linalg.norm(X, axis=1).max())


def residual_weights(X, B: Basis, p: float = 2.0, loss: Optional[Loss] = None) -> np.ndarray:
    """Sampling weight of each point given the current span.

    Residuals below the orthonormalization drop threshold are treated as
    exactly zero: such points could not enlarge the span anyway.
    """
    r = residual_norms(X, B)
    r[r <= _drop_tol(X)] = 0.0
    w = loss(r) if loss is not None else r ** p
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("sampling weights must be finite and non-negative")
    return w


def pth_power_weights(X, B: Basis, p: float) -> np.ndarray:
    """``w_i = d(x_i, span B)^p``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return residual_weights(X, B, p)


def weighted_iid_sample(w, m: int, seed=None) -> np.ndarray:
    """Draw ``m`` indices i.i.d. with ``Pr[i] = w_i / sum(w)``.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    w = np.asarray(w, dtype=float)
    if m < 1:
        raise ValueError("sample size must be >= 1")
    if w.ndim != 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a finite, non-negative vector")
    c = np.cumsum(w)
    if c.size == 0 or c[-1] <= WEIGHT_FLOOR:
        raise DegenerateWeights("total sampling weight is zero")
    rng = np.random.default_rng(seed)
    u = rng.random(m) * c[-1]
    idx = np.searchsorted(c, u, side="right")
    return np.minimum(idx, w.size - 1)


def _union(rounds) -> np.ndarray:
    if not rounds:
        return np.zeros(0, dtype=np.intp)
    cat = np.concatenate(rounds)
    _, first = np.unique(cat, return_index=True)
    return cat[np.sort(first)]


@dataclass(frozen=True, eq=False)
class SampleTrace:
    """Index batches drawn so far.

    ``rounds`` keeps every batch as drawn (duplicates included); ``all`` is
    their de-duplicated union in first-seen order. ``basis`` spans the
    points in ``all``.
    """

    basis: Basis
    rounds: tuple = ()
    weights_log: tuple = ()
    degenerate: bool = False
    all: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.all is None:
            object.__setattr__(self, "all", _union(self.rounds))

    @classmethod
    def start(cls, d: int) -> "SampleTrace":
        return cls(basis=Basis.empty(d))

    @property
    def size(self) -> int:
        return int(self.all.size)

    def appended(self, X, batch, weights) -> "SampleTrace":
        batch = np.asarray(batch, dtype=np.intp)
        new = np.setdiff1d(np.unique(batch), self.all, assume_unique=True)
        basis = self.basis
        if new.size:
            # Keep first-seen order so the basis is reproducible.
            fresh = set(new.tolist())
            order = [i for i in dict.fromkeys(batch.tolist()) if i in fresh]
            basis = extend_basis(basis, np.asarray(X)[order], tol=_drop_tol(X))
        return SampleTrace(
            basis=basis,
            rounds=self.rounds + (batch,),
            weights_log=self.weights_log + (np.asarray(weights, dtype=float),),
            degenerate=False,
        )

    def collapse(self, start: int) -> "SampleTrace":
        """Merge batches ``start:`` into one round (keeps the first weight snapshot)."""
        if start >= len(self.rounds) - 1:
            return self
        merged = np.concatenate(self.rounds[start:])
        return replace(
            self,
            rounds=self.rounds[:start] + (merged,),
            weights_log=self.weights_log[:start + 1],
            all=self.all,
        )


def adaptive_init(X, k: int, p: float = 2.0, seed=None, loss: Optional[Loss] = None) -> SampleTrace:
    """Pick up to ``k`` points one at a time, each ∝ residual^p to the picks so far.

    Stops early when the picks already span every point.
    """
    X = np.asarray(X, dtype=float)
    if not 1 <= k <= X.shape[1]:
        raise ValueError(f"k must lie in [1, {X.shape[1]}], got {k}")
    rng = np.random.default_rng(seed)
    basis = Basis.empty(X.shape[1])
    picks, first_w = [], None
    tol = _drop_tol(X)
    for _ in range(k):
        w = residual_weights(X, basis, p, loss)
        if first_w is None:
            first_w = w
        try:
            i = int(weighted_iid_sample(w, 1, rng)[0])
        except DegenerateWeights:
            break
        picks.append(i)
        basis = extend_basis(basis, X[i], tol=tol)
    if not picks:
        return SampleTrace(basis=basis, degenerate=True)
    return SampleTrace(
        basis=basis,
        rounds=(np.asarray(picks, dtype=np.intp),),
        weights_log=(first_w,),
        degenerate=len(picks) < k,
    )


def adaptive_round(
    X, current: SampleTrace, batch: int, p: float = 2.0, seed=None, loss: Optional[Loss] = None
) -> SampleTrace:
    """Append ``batch`` i.i.d. indices drawn ∝ residual^p to ``span(current.all)``.

    If the span already fits every point the trace comes back unchanged with
    ``degenerate=True``.
    """
    w = residual_weights(X, current.basis, p, loss)
    try:
        idx = weighted_iid_sample(w, batch, seed)
    except DegenerateWeights:
        return replace(current, degenerate=True)
    return current.appended(X, idx, w)


def residual_mass(X, B: Basis, p: float = 2.0, loss: Optional[Loss] = None) -> float:
    """``sum_i d(x_i, span B)^p`` with sub-resolution residuals zeroed."""
    return float(residual_weights(X, B, p, loss).sum())
