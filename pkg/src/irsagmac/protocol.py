"""Degree distributions, load bookkeeping and slotted-ALOHA baselines."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import binom

from .errors import ValidationError

PROB_SUM_TOL = 1e-12
MAX_MPR = 64


def poisson_weighted_sum(x: float, weights: Sequence[float]) -> float:
    """Return ``exp(-x) * sum_j weights[j] * x**j / j!``.

    Terms are built with a running product so no factorial is ever formed.
    """
    if len(weights) > MAX_MPR:
        raise ValidationError(f"MPR capability {len(weights)} exceeds the supported maximum {MAX_MPR}")
    term = math.exp(-x)
    acc = 0.0
    for j, w in enumerate(weights):
        if j:
            term *= x / j
        acc += w * term
    return acc


@dataclass(frozen=True)
class IrsaDistribution:
    """Replica-count distribution ``probs[d-1] = P(D = d)`` for d = 1..dmax."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 1:
            raise ValidationError("distribution.probs: at least one degree is required")
        if any(not math.isfinite(p) or p < 0.0 for p in probs):
            raise ValidationError("distribution.probs: entries must be finite and non-negative")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"distribution.probs: probabilities sum to {total!r}, expected 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "IrsaDistribution":
        pairs = list(pairs)
        if not pairs:
            raise ValidationError("distribution: empty (degree, probability) list")
        dmax = max(int(d) for d, _ in pairs)
        probs = [0.0] * dmax
        for d, p in pairs:
            d = int(d)
            if d < 1:
                raise ValidationError(f"distribution: degree {d} must be >= 1")
            if probs[d - 1]:
                raise ValidationError(f"distribution: degree {d} given twice")
            probs[d - 1] = float(p)
        return cls(tuple(probs))

    @classmethod
    def parse(cls, text: str) -> "IrsaDistribution":
        """Parse ``"2:0.5102, 4:0.4898"``; degrees not listed are zero."""
        items = [s for s in re.split(r"[,\s;]+", text.strip()) if s]
        pairs = []
        for item in items:
            if ":" not in item:
                raise ValidationError(f"distribution: expected 'degree:probability', got {item!r}")
            d, p = item.split(":", 1)
            try:
                pairs.append((int(d), float(p)))
            except ValueError as exc:
                raise ValidationError(f"distribution: cannot parse {item!r}") from exc
        return cls.from_pairs(pairs)

    def to_text(self) -> str:
        return ", ".join(f"{d}:{p!r}" for d, p in enumerate(self.probs, start=1) if p)

    @property
    def dmax(self) -> int:
        return len(self.probs)

    @property
    def dmin(self) -> int:
        return next(d for d, p in enumerate(self.probs, start=1) if p > 0.0)

    @property
    def lambda1(self) -> float:
        return self.probs[0]

    def coef(self, d: int) -> float:
        return self.probs[d - 1] if 1 <= d <= self.dmax else 0.0

    @property
    def mean_degree(self) -> float:
        return mean_degree(self)

    @property
    def efficiency(self) -> float:
        return 1.0 / mean_degree(self)

    def pgf(self, x: float) -> float:
        return sum(p * x**d for d, p in enumerate(self.probs, start=1))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(np.arange(1, self.dmax + 1), size=size, p=np.asarray(self.probs))


def mean_degree(dist: IrsaDistribution) -> float:
    """Average number of replicas; the protocol efficiency is its reciprocal."""
    return math.fsum(d * p for d, p in enumerate(dist.probs, start=1))


def pgf_derivative(dist: IrsaDistribution, x: float) -> float:
    """Derivative of the degree generating function, sum_d d * Lambda_d * x**(d-1)."""
    return math.fsum(d * p * x ** (d - 1) for d, p in enumerate(dist.probs, start=1) if p)


@dataclass(frozen=True)
class LoadPoint:
    g: float
    k_a_mean: float | None = None
    n_slots: int | None = None

    def __post_init__(self):
        if not self.g > 0:
            raise ValidationError("load.g must be positive")
        if self.k_a_mean is not None and self.n_slots is not None:
            if abs(self.g - self.k_a_mean / self.n_slots) > 1e-9:
                raise ValidationError("load.g is inconsistent with k_a_mean / n_slots")

    @classmethod
    def from_users(cls, k_a_mean: float, n_slots: int) -> "LoadPoint":
        return cls(k_a_mean / n_slots, k_a_mean, n_slots)


def _check_profile(values: Sequence[float], name: str) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if not values:
        raise ValidationError(f"{name}: at least one entry required")
    if len(values) > MAX_MPR:
        raise ValidationError(f"{name}: T={len(values)} exceeds the supported maximum {MAX_MPR}")
    for t, v in enumerate(values, start=1):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name}[{t}] = {v!r} is not a probability")
    for t in range(1, len(values)):
        if values[t] < values[t - 1]:
            raise ValidationError(
                f"{name}: entry t={t + 1} ({values[t]!r}) is below t={t} ({values[t - 1]!r}); "
                "error probabilities must be nondecreasing in t"
            )
    return values


@dataclass(frozen=True)
class SaConfig:
    """Frame-based slotted ALOHA with MPR capability ``t_mpr``."""

    t_mpr: int
    message_error: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "message_error", _check_profile(self.message_error, "message_error"))
        if self.t_mpr != len(self.message_error):
            raise ValidationError("t_mpr must equal the length of message_error")

    @classmethod
    def uniform(cls, t_mpr: int, p_m: float) -> "SaConfig":
        return cls(t_mpr, (p_m,) * t_mpr)


def sa_plr_asymptotic(cfg: SaConfig, load: LoadPoint | float) -> float:
    """Poisson-limit packet loss of slotted ALOHA at load ``beta``."""
    beta = load.g if isinstance(load, LoadPoint) else float(load)
    if beta < 0:
        raise ValidationError("load must be non-negative")
    ok = poisson_weighted_sum(beta, [1.0 - pm for pm in cfg.message_error])
    return min(1.0, max(0.0, 1.0 - ok))


def sa_plr_finite(cfg: SaConfig, k_a: int, n_slots: int) -> float:
    """Exact packet loss for ``k_a`` users each picking one of ``n_slots`` slots."""
    if k_a < 1 or n_slots < 1:
        raise ValidationError("k_a and n_slots must be >= 1")
    others = np.arange(cfg.t_mpr)
    pc = binom.pmf(others, k_a - 1, 1.0 / n_slots)
    ok = float(np.dot(pc, 1.0 - np.asarray(cfg.message_error)))
    return min(1.0, max(0.0, 1.0 - ok))
