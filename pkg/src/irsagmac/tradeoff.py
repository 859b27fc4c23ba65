"""Minimum Eb/N0 for a packet-loss target: concrete protocols and convergence boundaries.

A scenario fixes the payload ``log2 M``, the target ``eps``, the MPR
capability ``T``, the PHY option and the load: either a spectrum efficiency
``S`` (load ``G = n S / log2 M``) or ``K_a`` users in a frame of ``N``
channel uses (``N_s = N / n`` slots, ``G = K_a n / N``).  The slot length
``n`` and the slack ``e`` are free and searched over grids.

* achievable mode (concrete ``Lambda``): outer bisection on Eb/N0, inner
  feasibility ``G < G*(Lambda, T, P_E; e)`` and ``sum_d Lambda_d a**d < eps``
  with ``a = P_E|1 (1 + e)``;
* boundary mode (``Lambda_1`` only): ``G`` below the convergence boundary,
  ``Lambda_1 a + (1 - Lambda_1) a**2 < eps``, with ``eta`` free up to its cap.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammainc

from . import csvio
from .density_evolution import ErrorProfile, _fs, stability_check, StabilityCondition
from .errors import Infeasible, ValidationError
from .phy import (
    F1Model,
    PhyConfig,
    default_redundancy,
    ebno_from_snr,
    lin_to_db,
    db_to_lin,
    option1_profile,
    option2_profile,
    snr_from_ebno,
)
from .protocol import IrsaDistribution, SaConfig, sa_plr_asymptotic
from .threshold import ROOT_XTOL, converges

E_GRID = (0.05, 0.1, 0.25, 0.5, 1.0, 1.5)
EBNO_BRACKET = (-2.0, 30.0)
EBNO_RESOLUTION = 0.01
# multiplier on log2 M' assumed for the two-layer variant when none is given
TWO_LAYER_MULTIPLIER = 2.0
# coarse / fine snr scan steps (dB) for boundary mode
COARSE_DB = 0.1
FINE_DB = 0.005


class PhyOption(enum.Enum):
    OPTION1 = "Option1"
    OPTION2 = "Option2"
    OPTION2_TWO_LAYER = "Option2TwoLayer"


def geometric_n_grid(lo: int = 50, hi: int = 5000, ratio: float = 1.15) -> tuple[int, ...]:
    out, x = [], float(lo)
    while x <= hi:
        out.append(int(round(x)))
        x *= ratio
    if out[-1] != hi:
        out.append(hi)
    return tuple(sorted(set(out)))


def divisor_n_grid(frame_n: int, lo: int = 50, hi: int = 5000) -> tuple[int, ...]:
    """Divisors of ``frame_n`` in ``[lo, hi]``; all divisors >= 2 if that range is empty."""
    if frame_n < 2:
        raise ValidationError("frame_n must be >= 2")
    divs = [d for d in range(2, frame_n + 1) if frame_n % d == 0]
    inside = [d for d in divs if lo <= d <= hi]
    return tuple(inside or divs)


@dataclass(frozen=True)
class ScenarioSpec:
    log2_m: float
    target_eps: float
    t_mpr: int
    phy_option: PhyOption = PhyOption.OPTION1
    # concrete protocol, or boundary class given by one or several Lambda_1 values
    dist: IrsaDistribution | None = None
    lambda1: float | tuple[float, ...] | None = None
    eta_max: float | None = None
    # load: spectrum efficiency, or K_a users in a frame of N channel uses
    spectrum_efficiency: float | None = None
    k_a: float | None = None
    frame_n: int | None = None
    redundancy_r: float | None = None
    n_grid: tuple[int, ...] | None = None
    e_grid: tuple[float, ...] = E_GRID
    surrogate: F1Model | None = None
    rate_multiplier: float | None = None
    simplified_e0: bool = False
    ebno_bracket: tuple[float, float] = EBNO_BRACKET
    ebno_resolution: float = EBNO_RESOLUTION

    def __post_init__(self):
        if not 0.0 < self.target_eps < 1.0:
            raise ValidationError("target_eps must lie in (0, 1)")
        if self.log2_m < 1:
            raise ValidationError("log2_m must be >= 1")
        if self.t_mpr < 1:
            raise ValidationError("t_mpr must be >= 1")
        if (self.dist is None) == (self.lambda1 is None):
            raise ValidationError("give exactly one of dist (concrete protocol) or lambda1 (boundary class)")
        if self.dist is None:
            for l1 in self.lambda1_values:
                if not 0.0 <= l1 < 1.0:
                    raise ValidationError("lambda1 must lie in [0, 1)")
        if self.eta_max is not None and not 0.0 < self.eta_max <= 1.0:
            raise ValidationError("eta_max must lie in (0, 1]")
        s_mode = self.spectrum_efficiency is not None
        f_mode = self.k_a is not None or self.frame_n is not None
        if s_mode == f_mode:
            raise ValidationError("give either spectrum_efficiency or both k_a and frame_n")
        if s_mode and not self.spectrum_efficiency > 0:
            raise ValidationError("spectrum_efficiency must be positive")
        if f_mode and not (self.k_a is not None and self.k_a > 0 and self.frame_n is not None and self.frame_n >= 2):
            raise ValidationError("finite mode needs k_a > 0 and frame_n >= 2")
        if self.n_grid is not None:
            if not self.n_grid or min(self.n_grid) < 2:
                raise ValidationError("n_grid entries must be >= 2")
            if f_mode and any(self.frame_n % n for n in self.n_grid):
                raise ValidationError("n_grid entries must divide frame_n")
        if not self.e_grid or min(self.e_grid) <= 0:
            raise ValidationError("e_grid entries must be positive")
        if self.redundancy_r is not None and self.redundancy_r < 0:
            raise ValidationError("redundancy_r must be >= 0")
        if self.rate_multiplier is not None and not self.rate_multiplier > 0:
            raise ValidationError("rate_multiplier must be positive")
        lo, hi = self.ebno_bracket
        if not lo < hi:
            raise ValidationError("ebno_bracket must be ascending")
        if not self.ebno_resolution > 0:
            raise ValidationError("ebno_resolution must be positive")

    @property
    def concrete(self) -> bool:
        return self.dist is not None

    @property
    def lambda1_values(self) -> tuple[float, ...]:
        if self.lambda1 is None:
            return ()
        if isinstance(self.lambda1, (int, float)):
            return (float(self.lambda1),)
        return tuple(float(v) for v in self.lambda1)

    @property
    def finite_mode(self) -> bool:
        return self.frame_n is not None

    @property
    def r(self) -> float:
        return default_redundancy(self.target_eps) if self.redundancy_r is None else self.redundancy_r

    @property
    def multiplier(self) -> float:
        if self.phy_option is PhyOption.OPTION2_TWO_LAYER:
            return TWO_LAYER_MULTIPLIER if self.rate_multiplier is None else self.rate_multiplier
        return 1.0 if self.rate_multiplier is None else self.rate_multiplier

    @property
    def x(self) -> float:
        return self.spectrum_efficiency if not self.finite_mode else float(self.k_a)

    def candidate_n(self) -> tuple[int, ...]:
        if self.n_grid is not None:
            return tuple(sorted(self.n_grid))
        return divisor_n_grid(self.frame_n) if self.finite_mode else geometric_n_grid()

    def load(self, n: int) -> float:
        if self.finite_mode:
            return self.k_a * n / self.frame_n
        return n * self.spectrum_efficiency / self.log2_m

    def profile(self, n: int, snr: float) -> ErrorProfile:
        cfg = PhyConfig(n, self.log2_m, self.r, self.t_mpr, snr)
        if self.phy_option is PhyOption.OPTION1:
            return option1_profile(cfg, self.surrogate)
        return option2_profile(cfg, self.multiplier)

    def with_x(self, x: float) -> "ScenarioSpec":
        if self.finite_mode:
            return dataclasses.replace(self, k_a=x)
        return dataclasses.replace(self, spectrum_efficiency=x)


@dataclass(frozen=True)
class TradeoffPoint:
    x: float
    ebno_db: float
    n_opt: int
    e_opt: float
    feasible: bool = True
    eta_opt: float = math.nan
    lambda1_opt: float = math.nan

    def row(self):
        return (self.x, self.ebno_db, self.n_opt, self.e_opt, self.feasible)


def infeasible_point(x: float) -> TradeoffPoint:
    return TradeoffPoint(x, math.nan, 0, math.nan, False)


# ---------------------------------------------------------------- achievable


def _achievable_check(spec: ScenarioSpec, n: int, ebno_db: float, e_grid) -> float | None:
    """Slack ``e`` that makes ``(n, Eb/N0)`` feasible, ``None`` if none does (nan for SA)."""
    dist = spec.dist
    g = spec.load(n)
    errors = spec.profile(n, snr_from_ebno(ebno_db, dist.efficiency, spec.log2_m, n))
    eps = spec.target_eps
    if dist.dmax == 1:
        # slotted ALOHA: no iterations, loss is the single-pass slot failure
        ok = sa_plr_asymptotic(SaConfig(spec.t_mpr, errors.probs), g) < eps
        return math.nan if ok else None
    for e in e_grid:
        a = errors.pe1 * (1.0 + e)
        if a >= 1.0 or dist.pgf(a) >= eps:
            continue
        if converges(dist, errors, g, e):
            return e
    return None


def _e_grid_for(spec: ScenarioSpec, n: int) -> tuple[float, ...]:
    grid = tuple(sorted(spec.e_grid))
    if spec.dist.dmax == 1:
        return grid
    # with a stable error floor the threshold barely depends on e; keep the smallest
    snr_hi = snr_from_ebno(spec.ebno_bracket[1], spec.dist.efficiency, spec.log2_m, n)
    verdict = stability_check(spec.dist, spec.profile(n, snr_hi), max(spec.load(n), 1e-12))
    if spec.simplified_e0 and verdict.condition is not StabilityCondition.NEITHER:
        return grid[:1]
    return grid


def achievable_ebno_asymptotic(spec: ScenarioSpec) -> TradeoffPoint:
    """Smallest Eb/N0 (0.01 dB resolution) at which some ``(n, e)`` meets both constraints."""
    if not spec.concrete:
        raise ValidationError("achievable_ebno_asymptotic needs a concrete protocol")
    lo_b, hi_b = spec.ebno_bracket
    res = spec.ebno_resolution
    best: TradeoffPoint | None = None
    for n in spec.candidate_n():
        e_grid = _e_grid_for(spec, n)
        chk = lambda eb: _achievable_check(spec, n, eb, e_grid)
        hi = hi_b if best is None else best.ebno_db - res
        # feasibility is monotone in Eb/N0, so a point that cannot beat the
        # incumbent by one resolution step is skipped after a single check
        if hi < lo_b or chk(hi) is None:
            continue
        lo = lo_b
        if chk(lo) is not None:
            hi = lo
        while hi - lo > res:
            mid = 0.5 * (lo + hi)
            if chk(mid) is not None:
                hi = mid
            else:
                lo = mid
        best = TradeoffPoint(spec.x, hi, n, chk(hi))
    if best is None:
        raise Infeasible(f"no (n, e) meets eps = {spec.target_eps} within Eb/N0 <= {hi_b} dB")
    return best


# ---------------------------------------------------------------- boundary


def _x_star(weights: np.ndarray, rhs: float) -> float:
    """Root of ``sum_t w_t P(Poisson(x) >= t) = rhs``; ``inf`` when out of reach."""
    t = np.arange(1, len(weights) + 1)
    f = lambda x: float(np.dot(weights, gammainc(t, x))) - rhs
    if f(1e300) <= 0.0:
        return math.inf
    hi = 1.0
    while f(hi) <= 0.0:
        hi *= 2.0
    return brentq(f, 0.0, hi, xtol=ROOT_XTOL)


def _boundary_at_snr(spec: ScenarioSpec, n: int, lambda1: float, snr: float):
    """Best ``(Eb/N0, e, eta)`` at one ``(n, snr)``; ``None`` if no ``e`` works.

    For a given error profile the boundary decreases in ``eta`` and every
    constraint loosens as ``e`` grows, so the answer is the largest ``e`` of
    the grid that keeps the floor below ``eps`` together with the largest
    ``eta`` that keeps the load under the boundary.
    """
    g = spec.load(n)
    errors = spec.profile(n, snr)
    pe1 = errors.pe1
    w = np.array([1.0 - p for p in errors.probs])
    eps = spec.target_eps
    eta_hi = 1.0 / (2.0 - lambda1)
    if spec.eta_max is not None:
        eta_hi = min(eta_hi, spec.eta_max)
    grid = (0.0,) if spec.simplified_e0 else tuple(sorted(spec.e_grid, reverse=True))
    for e in grid:
        a = pe1 * (1.0 + e)
        if a >= 0.5 or lambda1 * a + (1.0 - lambda1) * a * a >= eps:
            continue
        c = 1.0 - lambda1 * a - (1.0 - lambda1) * a * a
        if lambda1 > 0.0 and _fs(1.0, g * lambda1, 1.0, w) >= a:
            return None
        x = _x_star(w, c * g)
        if x == math.inf:
            return None
        eta = min(g / x, (1.0 - pe1) / c, eta_hi)
        return ebno_from_snr(snr, eta, spec.log2_m, n), e, eta
    return None


def _boundary_for_n(spec: ScenarioSpec, n: int, lambda1: float):
    lo_b, hi_b = spec.ebno_bracket
    eta_hi = spec.eta_max or 1.0
    # snr range covering the Eb/N0 bracket for every admissible eta
    s_lo = lo_b + lin_to_db(2.0 * 1e-3 * spec.log2_m / n)
    s_hi = hi_b + lin_to_db(2.0 * eta_hi * spec.log2_m / n)
    # absolute dB grid so cached channel statistics are shared across n
    coarse = np.arange(math.floor(s_lo / COARSE_DB), math.ceil(s_hi / COARSE_DB) + 1) * COARSE_DB
    best = None
    for s in coarse:
        r = _boundary_at_snr(spec, n, lambda1, db_to_lin(float(s)))
        if r is not None and (best is None or r[0] < best[0][0]):
            best = (r, float(s))
    if best is None:
        return None
    centre = best[1]
    fine = centre + np.arange(-round(2 * COARSE_DB / FINE_DB), round(2 * COARSE_DB / FINE_DB) + 1) * FINE_DB
    out = best[0]
    for s in fine:
        r = _boundary_at_snr(spec, n, lambda1, db_to_lin(float(s)))
        if r is not None and r[0] < out[0]:
            out = r
    return out


def boundary_ebno(spec: ScenarioSpec) -> TradeoffPoint:
    """Smallest Eb/N0 over ``(n, eta, e)`` (and the given ``Lambda_1`` values) on the boundary."""
    if spec.concrete:
        raise ValidationError("boundary_ebno needs a boundary class (lambda1)")
    lo_b, hi_b = spec.ebno_bracket
    best: TradeoffPoint | None = None
    for l1 in spec.lambda1_values:
        for n in spec.candidate_n():
            r = _boundary_for_n(spec, n, l1)
            if r is None:
                continue
            ebno, e, eta = r
            if best is None or ebno < best.ebno_db:
                best = TradeoffPoint(spec.x, ebno, n, e, True, eta, l1)
    if best is None or best.ebno_db > hi_b:
        raise Infeasible(f"no (n, eta, e) meets eps = {spec.target_eps} within Eb/N0 <= {hi_b} dB")
    if best.ebno_db < lo_b:
        best = dataclasses.replace(best, ebno_db=lo_b)
    return best


# ---------------------------------------------------------------- sweeps


def _sweep(spec: ScenarioSpec, xs: Sequence[float], mode: str) -> list[TradeoffPoint]:
    fn = {"achievable": achievable_ebno_asymptotic, "boundary": boundary_ebno}.get(mode)
    if fn is None:
        raise ValidationError("mode must be 'achievable' or 'boundary'")
    out = []
    for x in xs:
        try:
            out.append(fn(spec.with_x(float(x))))
        except Infeasible:
            out.append(infeasible_point(float(x)))
    return out


def sweep_spectrum(spec: ScenarioSpec, s_grid: Sequence[float], mode: str = "achievable") -> list[TradeoffPoint]:
    s = np.asarray(s_grid, dtype=float)
    if s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) <= 0):
        raise ValidationError("s_grid must be positive and strictly ascending")
    if spec.finite_mode:
        raise ValidationError("sweep_spectrum needs a spectrum-efficiency scenario")
    return _sweep(spec, s, mode)


def sweep_ka(spec: ScenarioSpec, ka_grid: Sequence[float], frame_n: int, mode: str = "achievable") -> list[TradeoffPoint]:
    ka = np.asarray(ka_grid, dtype=float)
    if ka.size == 0 or np.any(ka <= 0):
        raise ValidationError("ka_grid entries must be positive")
    base = dataclasses.replace(spec, spectrum_efficiency=None, k_a=float(ka[0]), frame_n=int(frame_n))
    return _sweep(base, ka, mode)


TRADEOFF_HEADER = ["x", "ebno_db", "n_opt", "e_opt", "feasible"]


def write_tradeoff(path, points: Sequence[TradeoffPoint], comments=()):
    return csvio.write_csv(path, TRADEOFF_HEADER, [p.row() for p in points], comments)


# ---------------------------------------------------------------- reference curves


@dataclass(frozen=True)
class ReferenceCurve:
    """Externally computed Eb/N0 curve (e.g. a random-coding bound), never computed here."""

    x: np.ndarray
    ebno_db: np.ndarray

    def __post_init__(self):
        if len(self.x) != len(self.ebno_db) or len(self.x) < 1:
            raise ValidationError("reference curve needs matching, non-empty x and ebno_db columns")
        if np.any(np.diff(self.x) <= 0):
            raise ValidationError("reference curve x must be strictly ascending")

    @classmethod
    def from_csv(cls, path) -> "ReferenceCurve":
        header, rows = csvio.read_csv(path)
        try:
            ix, ie = header.index("x"), header.index("ebno_db")
        except ValueError as exc:
            raise ValidationError("reference CSV needs columns x and ebno_db") from exc
        data = sorted((float(r[ix]), float(r[ie])) for r in rows)
        return cls(np.array([d[0] for d in data]), np.array([d[1] for d in data]))

    def at(self, x: float) -> float:
        if not self.x[0] <= x <= self.x[-1]:
            return math.nan
        return float(np.interp(x, self.x, self.ebno_db))


def gap_to_reference(points: Sequence[TradeoffPoint], ref: ReferenceCurve) -> float:
    """Largest ``ebno_db - reference`` over feasible points inside the reference range."""
    gaps = [p.ebno_db - ref.at(p.x) for p in points if p.feasible and not math.isnan(ref.at(p.x))]
    if not gaps:
        raise ValidationError("no feasible point inside the reference curve range")
    return max(gaps)
