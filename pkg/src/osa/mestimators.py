"""M-estimator losses and the residual-sampling solver variant."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DegenerateWeights
from .geometry import Basis, as_points
from .losses import Huber, LossFunction, PthPower, Tukey, loss_eval, parse_loss
from .sampling import WEIGHT_FLOOR, adaptive_init, derive_rng, residual_weights
from .solver import SolveReport, SolverConfig, _finish, grow_rounds, inlier_count, trimmed_cost

__all__ = [
    "PthPower",
    "Huber",
    "Tukey",
    "LossFunction",
    "loss_eval",
    "parse_loss",
    "MEstimatorConfig",
    "residual_sample_probabilities",
    "residual_sample",
    "m_estimator_solve",
]

_RESIDUAL_KEY = 2_000_003


@dataclass(frozen=True)
class MEstimatorConfig:
    """Configuration of :func:`m_estimator_solve`.

    ``sample_constant`` defaults to ``8 k^3 / eps^2 * ln(k / eps)``. ``p`` is
    the exponent of the secondary p-cost report and of the batch-size
    formula for the refinement rounds (default: the loss exponent for
    :class:`PthPower`, else 2).
    """

    loss: LossFunction
    k: int = 1
    alpha: float = 0.0
    epsilon: float = 0.3
    delta: float = 0.1
    seed: int = 0
    sample_constant: Optional[float] = None
    refine: bool = True
    rounds_T: Optional[int] = None
    batch_size: Optional[int] = None
    trials: Optional[int] = None
    extraction_iters: int = 50
    p: Optional[float] = None

    def __post_init__(self):
        if self.p is None:
            object.__setattr__(self, "p", self.loss.p if isinstance(self.loss, PthPower) else 2.0)
        if self.sample_constant is None:
            k, e = self.k, self.epsilon
            object.__setattr__(self, "sample_constant", 8.0 * k ** 3 / e ** 2 * math.log(k / e))
        if not self.sample_constant > 0:
            raise ValueError("sample_constant must be positive")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            k=self.k,
            p=self.p,
            alpha=self.alpha,
            epsilon=self.epsilon,
            delta=self.delta,
            rounds_T=self.rounds_T,
            batch_size=self.batch_size,
            trials=self.trials,
            extraction_iters=self.extraction_iters,
            seed=self.seed,
        )


def residual_sample_probabilities(X, V0: Basis, loss: LossFunction, sample_constant: float) -> np.ndarray:
    """Inclusion probabilities ``min(1, C' M(r_i) / sum_j M(r_j))``."""
    M = residual_weights(np.asarray(X, dtype=float), V0, loss=loss)
    total = float(M.sum())
    if total <= WEIGHT_FLOOR:
        raise DegenerateWeights("all residual losses are zero")
    return np.minimum(1.0, sample_constant * M / total)


def residual_sample(probs, seed=None) -> np.ndarray:
    """Independent Bernoulli inclusion; returns the selected indices."""
    u = np.random.default_rng(seed).random(len(probs))
    return np.flatnonzero(u < np.asarray(probs))


def m_estimator_solve(X, cfg: MEstimatorConfig) -> SolveReport:
    """Coarse start, one non-adaptive residual-sampling pass, optional adaptive rounds.

    Costs in the report use the configured loss. ``extras`` adds the p-costs,
    the expected residual-sample size and the measured initialization factor
    ``init_approx_C`` (untrimmed loss of the start over that of the output).
    """
    t0 = time.perf_counter()
    X = as_points(X)
    loss = cfg.loss
    scfg = cfg.solver_config()
    inlier_count(X.shape[0], cfg.alpha)
    trace = adaptive_init(X, cfg.k, 2.0, derive_rng(cfg.seed, 0, 0, 0))
    V0 = trace.basis
    start_cost = float(residual_weights(X, V0, loss=loss).sum())
    extras = {"expected_sample_size": 0.0, "residual_sample_size": 0}
    masses = [float(residual_weights(X, V0, loss=loss).sum())]
    try:
        probs = residual_sample_probabilities(X, V0, loss, cfg.sample_constant)
    except DegenerateWeights:
        probs = None
    if probs is not None:
        S = residual_sample(probs, derive_rng(cfg.seed, _RESIDUAL_KEY))
        extras["expected_sample_size"] = float(probs.sum())
        extras["residual_sample_size"] = int(S.size)
        if S.size:
            trace = trace.appended(X, S, residual_weights(X, V0, loss=loss))
        if cfg.refine:
            trace, more = grow_rounds(X, trace, scfg, loss)
            masses.extend(more)
        else:
            masses.append(float(residual_weights(X, trace.basis, loss=loss).sum()))
    report = _finish(X, trace, masses, scfg, loss, t0, extras)
    final_cost = float(residual_weights(X, report.subspace, loss=loss).sum())
    report.extras["init_approx_C"] = start_cost / final_cost if final_cost > 0 else None
    report.extras["trimmed_pcost_k"] = trimmed_cost(X, report.subspace, cfg.alpha, cfg.p)
    report.extras["trimmed_pcost_span"] = trimmed_cost(X, report.span, cfg.alpha, cfg.p)
    report.extras["loss"] = loss.spec()
    report.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return report
