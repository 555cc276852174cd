"""Residual loss functions: p-th power, Huber, Tukey bisquare."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_IRLS_FLOOR = 1e-12


@dataclass(frozen=True)
class PthPower:
    p: float = 2.0

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")

    def __call__(self, r):
        return np.asarray(r, dtype=float) ** self.p

    def irls_weight(self, r):
        r = np.asarray(r, dtype=float)
        if self.p == 2:
            return np.ones_like(r)
        return np.maximum(r, _IRLS_FLOOR) ** (self.p - 2)

    def spec(self) -> str:
        return f"lp:{self.p:g}"


@dataclass(frozen=True)
class Huber:
    """Quadratic below ``t``, linear above; C^1 at the threshold."""

    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("Huber threshold must be positive")

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        t = self.t
        return np.where(r < t, 0.5 * r * r, t * r - 0.5 * t * t)

    def irls_weight(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.t, 1.0, self.t / np.maximum(r, _IRLS_FLOOR))

    def spec(self) -> str:
        return f"huber:{self.t:g}"


@dataclass(frozen=True)
class Tukey:
    """Tukey bisquare, saturating at ``t**6 / 6`` beyond the threshold."""

    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("Tukey threshold must be positive")

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        t2 = self.t * self.t
        cap = t2 ** 3 / 6.0
        return np.where(r < self.t, (t2 ** 3 - (t2 - r * r) ** 3) / 6.0, cap)

    def irls_weight(self, r):
        r = np.asarray(r, dtype=float)
        t2 = self.t * self.t
        return np.where(r < self.t, (t2 - r * r) ** 2, 0.0)

    def spec(self) -> str:
        return f"tukey:{self.t:g}"


LossFunction = PthPower | Huber | Tukey


def parse_loss(text: str) -> LossFunction:
    """Parse ``lp:<p>``, ``huber:<t>`` or ``tukey:<t>``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    try:
        value = float(arg)
    except ValueError:
        raise ValueError(f"bad loss spec {text!r}; expected lp:<p>, huber:<t> or tukey:<t>") from None
    if kind == "lp":
        return PthPower(value)
    if kind == "huber":
        return Huber(value)
    if kind == "tukey":
        return Tukey(value)
    raise ValueError(f"unknown loss kind {kind!r}")


def loss_eval(loss: LossFunction, x: float) -> float:
    """Loss at a single non-negative residual."""
    if x < 0:
        raise ValueError("loss is defined on non-negative residuals")
    return float(loss(x))
