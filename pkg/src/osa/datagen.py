"""Planted instances: noisy inliers near a random k-dim subspace plus outliers."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geometry import Basis, orthonormalize
from .oracle import EXACT_FIT, delta_of_instance
from .sampling import derive_rng
from .solver import inlier_count

OUTLIER_MODELS = ("uniform-far", "clustered", "adversarial-near-subspace")
# Instances with at most this many inlier subsets get delta from the exact optimum.
DELTA_ORACLE_BUDGET = 10 ** 4


@dataclass(frozen=True)
class PlantedTruth:
    """Ground truth of a generated instance.

    ``achieved_delta`` is measured against the planted subspace, which only
    approximates the true optimum (``delta_reference`` says so).
    """

    subspace: Basis
    inlier_indices: np.ndarray
    sigma_in: float
    outlier_scale: float
    outlier_model: str
    achieved_delta: object
    alpha: float
    affine_origin: Optional[np.ndarray] = None
    delta_reference: str = "planted"

    def to_dict(self) -> dict:
        return {
            "subspace": self.subspace.vectors.tolist(),
            "inlier_indices": [int(i) for i in self.inlier_indices],
            "sigma_in": self.sigma_in,
            "outlier_scale": self.outlier_scale,
            "outlier_model": self.outlier_model,
            "achieved_delta": self.achieved_delta,
            "delta_reference": self.delta_reference,
            "alpha": self.alpha,
            "affine_origin": None if self.affine_origin is None else self.affine_origin.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PlantedTruth":
        origin = doc.get("affine_origin")
        return cls(
            subspace=Basis(np.array(doc["subspace"], dtype=float)),
            inlier_indices=np.array(doc["inlier_indices"], dtype=np.intp),
            sigma_in=doc["sigma_in"],
            outlier_scale=doc["outlier_scale"],
            outlier_model=doc["outlier_model"],
            achieved_delta=doc["achieved_delta"],
            alpha=doc["alpha"],
            affine_origin=None if origin is None else np.array(origin, dtype=float),
            delta_reference=doc.get("delta_reference", "planted"),
        )


def _random_subspace(rng, d: int, k: int) -> Basis:
    Q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return orthonormalize(Q.T)


def _outliers(rng, model: str, count: int, d: int, k: int) -> np.ndarray:
    # Unit-scale outliers; every model is linear in the scale.
    if count == 0:
        return np.zeros((0, d))
    if model == "uniform-far":
        # Uniform directions, radius uniform in [scale, 2 * scale].
        u = rng.standard_normal((count, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return u * rng.uniform(1.0, 2.0, size=(count, 1))
    if model == "clustered":
        c = rng.standard_normal(d)
        c *= 1.5 / np.linalg.norm(c)
        return c + 0.1 * rng.standard_normal((count, d))
    if model == "adversarial-near-subspace":
        # Points near a second random k-dim subspace, coefficient norm ~ 1.
        U = _random_subspace(rng, d, k).vectors
        coef = rng.standard_normal((count, k)) / math.sqrt(k)
        return coef @ U + 0.01 * rng.standard_normal((count, d))
    raise ValueError(f"unknown outlier model {model!r}; choose from {OUTLIER_MODELS}")


def gen_planted(
    n: int,
    d: int,
    k: int,
    alpha: float,
    sigma_in: float,
    outlier_model: str = "uniform-far",
    seed: int = 0,
    outlier_scale: Optional[float] = None,
    p: float = 2.0,
    target_delta: Optional[float] = None,
):
    """Generate ``(X, truth)``.

    Inliers are standard-normal combinations of a random orthonormal basis
    plus isotropic noise of scale ``sigma_in`` orthogonal to it. The default
    ``outlier_scale`` is ``max(10 * sigma_in * sqrt(d), 1)``; alternatively
    ``target_delta`` picks the scale at which the planted subspace's inliers
    carry that share of its total p-cost. Rows are shuffled so inliers are
    not a prefix.
    """
    if not (1 <= k < d):
        raise ValueError(f"need 1 <= k < d, got k={k}, d={d}")
    if n < 1:
        raise ValueError("n must be positive")
    if sigma_in < 0:
        raise ValueError("sigma_in must be non-negative")
    if outlier_model not in OUTLIER_MODELS:
        raise ValueError(f"unknown outlier model {outlier_model!r}; choose from {OUTLIER_MODELS}")
    n_in = inlier_count(n, alpha)
    if target_delta is not None and outlier_scale is not None:
        raise ValueError("give outlier_scale or target_delta, not both")
    if outlier_scale is None and target_delta is None:
        outlier_scale = max(10.0 * sigma_in * math.sqrt(d), 1.0)
    if outlier_scale is not None and outlier_scale <= 0:
        raise ValueError("outlier_scale must be positive")
    rng = derive_rng(seed, 0)
    V = _random_subspace(rng, d, k)
    Vm = V.vectors
    inl = rng.standard_normal((n_in, k)) @ Vm
    noise = sigma_in * rng.standard_normal((n_in, d))
    inl += noise - (noise @ Vm.T) @ Vm
    out = _outliers(rng, outlier_model, n - n_in, d, k)
    perm = rng.permutation(n)

    def assemble(scale):
        X = np.empty((n, d))
        X[perm[:n_in]] = inl
        X[perm[n_in:]] = scale * out
        return X

    if target_delta is not None:
        outlier_scale = _calibrate_scale(assemble, V, k, alpha, p, target_delta)
    X = assemble(outlier_scale)
    inliers = np.sort(perm[:n_in])
    reference = "planted"
    if p == 2 and math.comb(n, n_in) <= DELTA_ORACLE_BUDGET:
        delta, reference = delta_of_instance(X, k, alpha, p), "oracle"
    else:
        delta = delta_of_instance(X, k, alpha, p, truth=V)
    truth = PlantedTruth(
        subspace=V,
        inlier_indices=inliers,
        sigma_in=float(sigma_in),
        outlier_scale=float(outlier_scale),
        outlier_model=outlier_model,
        achieved_delta=delta,
        alpha=float(alpha),
        delta_reference=reference,
    )
    return X, truth


def _calibrate_scale(assemble, V: Basis, k: int, alpha: float, p: float, target: float) -> float:
    # Bisection in log-scale; delta falls as the outliers move away.
    if not 0 < target < 1 - alpha:
        raise ValueError(f"target_delta must lie in (0, {1 - alpha:g})")

    def gap(log_s):
        got = delta_of_instance(assemble(math.exp(log_s)), k, alpha, p, truth=V)
        return (1.0 if got == EXACT_FIT else got) - target

    lo, hi = math.log(1e-6), math.log(1e6)
    if gap(lo) < 0 or gap(hi) > 0:
        raise ValueError(f"target_delta={target} is not reachable for this instance")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def gen_affine_planted(
    n: int,
    d: int,
    k: int,
    alpha: float,
    sigma_in: float,
    outlier_model: str = "uniform-far",
    seed: int = 0,
    outlier_scale: Optional[float] = None,
    origin_scale: float = 1.0,
    p: float = 2.0,
    target_delta: Optional[float] = None,
):
    """:func:`gen_planted` translated by a random origin of norm ``origin_scale``.

    The origin comes from its own stream, so ``origin_scale=0`` reproduces
    :func:`gen_planted` exactly for the same seed.
    """
    X, truth = gen_planted(n, d, k, alpha, sigma_in, outlier_model, seed, outlier_scale, p, target_delta)
    u = derive_rng(seed, 1).standard_normal(d)
    origin = u / np.linalg.norm(u) * origin_scale
    X = X + origin
    return X, replace(truth, affine_origin=origin)
