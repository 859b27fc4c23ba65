"""Density evolution for IRSA over collision and Gaussian multiple-access channels.

The recursion tracks ``p`` (edge attached to an unresolved slot) and ``q``
(edge attached to an undecoded user)::

    q_l = f_b(p_{l-1}) = Lambda'(p_{l-1}) / dbar
    p_l = f_s(q_l)

starting from ``p_0 = f_s(1)``.  Slot decoding with ``t`` residual packets
fails with probability ``P_E|t``; imperfect interference subtraction is
modelled by the SIC efficiency ``gamma``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import csvio
from .errors import ValidationError
from .protocol import IrsaDistribution, _check_profile, mean_degree, pgf_derivative, poisson_weighted_sum


@dataclass(frozen=True)
class ErrorProfile:
    """Conditional slot-decoding error probabilities ``P_E|t`` for t = 1..T."""

    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", _check_profile(self.probs, "errors.probs"))

    @classmethod
    def uniform(cls, t_mpr: int, p: float) -> "ErrorProfile":
        return cls((float(p),) * t_mpr)

    @classmethod
    def zeros(cls, t_mpr: int) -> "ErrorProfile":
        return cls((0.0,) * t_mpr)

    @property
    def t_mpr(self) -> int:
        return len(self.probs)

    @property
    def pe1(self) -> float:
        return self.probs[0]

    def pe(self, t: int) -> float:
        """``P_E|t`` with the convention ``P_E|t = 1`` beyond the MPR capability."""
        return self.probs[t - 1] if 1 <= t <= self.t_mpr else 1.0

    def csv_rows(self):
        return [(t, p) for t, p in enumerate(self.probs, start=1)]

    def to_csv(self, path):
        return csvio.write_csv(path, ["t", "pe"], self.csv_rows())


@dataclass(frozen=True)
class DeParams:
    dist: IrsaDistribution
    errors: ErrorProfile
    g: float
    sic_efficiency: float = 1.0
    max_iters: int = 10_000
    fp_tolerance: float = 1e-12

    def __post_init__(self):
        if not (self.g > 0 and math.isfinite(self.g)):
            raise ValidationError("g: average load must be positive")
        if not 0.0 < self.sic_efficiency <= 1.0:
            raise ValidationError("sic_efficiency must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not self.fp_tolerance > 0:
            raise ValidationError("fp_tolerance must be positive")

    @property
    def mean_degree(self) -> float:
        return mean_degree(self.dist)

    def with_load(self, g: float) -> "DeParams":
        return DeParams(self.dist, self.errors, g, self.sic_efficiency, self.max_iters, self.fp_tolerance)


class Convergence(enum.Enum):
    FIXED_POINT = "FixedPoint"
    MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class DeState:
    trajectory: tuple[tuple[float, float], ...]
    p_infinity: float
    converged_reason: Convergence

    @property
    def iterations(self) -> int:
        return len(self.trajectory) - 1

    @property
    def q_infinity(self) -> float:
        return self.trajectory[-1][1]

    def plr(self, dist: IrsaDistribution) -> float:
        return asymptotic_plr(self.p_infinity, dist)

    def csv_rows(self):
        return [(i, p, q) for i, (p, q) in enumerate(self.trajectory)]

    def to_csv(self, path):
        return csvio.write_csv(path, ["iteration", "p", "q"], self.csv_rows())


def fs_collision(q: float, g: float, mean_deg: float, t_mpr: int) -> float:
    """Slot-node update on the noiseless collision channel with T-fold MPR."""
    x = g * mean_deg * q
    # P(Poisson(x) <= T-1), accumulated with a running term
    term = math.exp(-x)
    acc = term
    for t in range(1, t_mpr):
        term *= x / t
        acc += term
    return min(1.0, max(0.0, 1.0 - acc))


def _success_weights(errors: ErrorProfile) -> list[float]:
    return [1.0 - pe for pe in errors.probs]


def _fs(q: float, gd: float, gamma: float, weights: Sequence[float]) -> float:
    x = gd * q
    ok = poisson_weighted_sum(x, weights)
    if gamma != 1.0:
        ok *= math.exp(-gd * (1.0 - gamma) * (1.0 - q))
    return min(1.0, max(0.0, 1.0 - ok))


def fs_gmac(q: float, params: DeParams) -> float:
    """Slot-node update with decoding errors and (optionally) imperfect SIC.

    ``1 - exp(-G dbar (1 - gamma + gamma q)) * sum_t (1 - P_E|t) (G dbar q)^(t-1) / (t-1)!``
    """
    gd = params.g * params.mean_degree
    return _fs(q, gd, params.sic_efficiency, _success_weights(params.errors))


def fb(p: float, dist: IrsaDistribution) -> float:
    return min(1.0, max(0.0, pgf_derivative(dist, p) / mean_degree(dist)))


def fs_derivative(q: float, params: DeParams) -> float:
    """Derivative of :func:`fs_gmac` in ``q`` for perfect SIC."""
    if params.sic_efficiency != 1.0:
        raise ValidationError("fs_derivative is only defined for perfect SIC (sic_efficiency = 1)")
    gd = params.g * params.mean_degree
    T = params.errors.t_mpr
    diffs = [params.errors.pe(t + 1) - params.errors.pe(t) for t in range(1, T + 1)]
    return gd * poisson_weighted_sum(gd * q, diffs)


class _Maps:
    """Precomputed f_s / f_b pair for repeated evaluation at one parameter set."""

    def __init__(self, params: DeParams):
        self.dbar = mean_degree(params.dist)
        self.gd = params.g * self.dbar
        self.gamma = params.sic_efficiency
        self.weights = _success_weights(params.errors)
        self.fb_terms = [(d - 1, d * lam / self.dbar) for d, lam in enumerate(params.dist.probs, start=1) if lam]

    def fs(self, q: float) -> float:
        return _fs(q, self.gd, self.gamma, self.weights)

    def fb(self, p: float) -> float:
        s = 0.0
        for k, c in self.fb_terms:
            s += c * p**k
        return min(1.0, max(0.0, s))

    def h(self, p: float) -> float:
        return self.fs(self.fb(p)) - p


def run_de(params: DeParams) -> DeState:
    """Iterate ``p_l = f_s(f_b(p_{l-1}))`` from ``p_0 = f_s(1)`` to a fixed point."""
    maps = _Maps(params)
    p = maps.fs(1.0)
    traj = [(p, 1.0)]
    reason = Convergence.MAX_ITERS
    for _ in range(params.max_iters):
        q = maps.fb(p)
        p_new = maps.fs(q)
        # the recursion is monotone; clip rounding noise so the trajectory never rises
        p_new = min(p_new, p)
        traj.append((p_new, q))
        done = abs(p_new - p) < params.fp_tolerance
        p = p_new
        if done:
            reason = Convergence.FIXED_POINT
            break
    return DeState(tuple(traj), p, reason)


def asymptotic_plr(p_inf: float, dist: IrsaDistribution) -> float:
    """Packet loss ``sum_d Lambda_d p_inf**d`` once the SIC process has stopped."""
    if not 0.0 <= p_inf <= 1.0:
        raise ValidationError("p_inf must lie in [0, 1]")
    return dist.pgf(p_inf)


def error_floor(dist: IrsaDistribution, errors: ErrorProfile) -> float:
    """Minimum asymptotic packet loss, reached as the load vanishes."""
    return asymptotic_plr(errors.pe1, dist)


@dataclass(frozen=True)
class ExitChart:
    """Uniformly sampled EXIT curves: ``q = f_b(p)`` and ``p = f_s(q)``."""

    p: np.ndarray
    fb: np.ndarray
    q: np.ndarray
    fs: np.ndarray
    g: float = field(default=float("nan"))

    def fb_rows(self):
        return list(zip(self.p, self.fb))

    def fs_rows(self):
        return list(zip(self.q, self.fs))

    def to_csv(self, fb_path, fs_path):
        csvio.write_csv(fb_path, ["p", "q"], self.fb_rows())
        csvio.write_csv(fs_path, ["q", "p"], self.fs_rows())


def exit_chart(params: DeParams, samples: int = 101) -> ExitChart:
    if samples < 2:
        raise ValidationError("samples must be >= 2")
    maps = _Maps(params)
    grid = np.linspace(0.0, 1.0, samples)
    return ExitChart(
        p=grid.copy(),
        fb=np.array([maps.fb(x) for x in grid]),
        q=grid.copy(),
        fs=np.array([maps.fs(x) for x in grid]),
        g=params.g,
    )


@dataclass(frozen=True)
class Crossing:
    p: float
    q: float
    stable: bool


def exit_crossings(params: DeParams, n_scan: int = 1000, tol: float = 1e-10) -> list[Crossing]:
    """All fixed points of ``p -> f_s(f_b(p))`` on [0, 1], ascending in ``p``.

    The interval is scanned in ``n_scan`` pieces and each sign change refined
    by bracketed root finding.  A crossing is stable when ``f_s(f_b(p)) - p``
    goes from positive to negative through it.
    """
    maps = _Maps(params)
    grid = np.linspace(0.0, 1.0, n_scan + 1)
    h = np.array([maps.h(x) for x in grid])
    roots: list[tuple[float, bool]] = []
    for i in range(n_scan):
        a, b, ha, hb = grid[i], grid[i + 1], h[i], h[i + 1]
        if ha == 0.0:
            left = h[i - 1] if i > 0 else 1.0
            roots.append((a, left > 0 and hb < 0 or (i == 0 and hb <= 0)))
        elif ha * hb < 0:
            r = brentq(maps.h, a, b, xtol=tol)
            roots.append((r, ha > 0))
    if h[-1] == 0.0:
        roots.append((1.0, h[-2] > 0))
    return [Crossing(float(r), maps.fb(r), bool(s)) for r, s in roots]


class StabilityCondition(enum.Enum):
    CONDITION_A = "ConditionA"
    CONDITION_B = "ConditionB"
    NEITHER = "Neither"


@dataclass(frozen=True)
class StabilityVerdict:
    condition: StabilityCondition
    dmin: int
    # (P_E|2 - P_E|1) * 2 Lambda_2 g_max; condition b) is read as ratio <= 0.1
    ratio: float


def stability_check(dist: IrsaDistribution, errors: ErrorProfile, g_max: float, factor: float = 0.1) -> StabilityVerdict:
    """Which sufficient condition for an error floor close to ``P_E|1`` applies.

    a) ``d_min >= 3``; b) ``d_min = 2``, ``T >= 2`` and ``P_E|2 - P_E|1`` much
    smaller than ``1 / (2 Lambda_2 g_max)``.  "Much smaller" is read as at most
    ``factor`` times that value, a heuristic, so the raw ratio is returned too.
    """
    if not g_max > 0:
        raise ValidationError("g_max must be positive")
    dmin = dist.dmin
    ratio = float("nan")
    if dmin >= 3:
        return StabilityVerdict(StabilityCondition.CONDITION_A, dmin, ratio)
    if dmin == 2 and errors.t_mpr >= 2:
        ratio = (errors.pe(2) - errors.pe(1)) * 2.0 * dist.coef(2) * g_max
        if ratio <= factor:
            return StabilityVerdict(StabilityCondition.CONDITION_B, dmin, ratio)
    return StabilityVerdict(StabilityCondition.NEITHER, dmin, ratio)
