"""Load thresholds, second-fixed-point onset and convergence boundaries.

Threshold: the largest load for which density evolution settles at
``p_inf <= P_E|1 (1 + e)``.  Convergence boundary: a converse bound on that
threshold for every protocol with the same efficiency ``eta``, degree-1
probability ``Lambda_1``, MPR capability and error profile.  It is the
minimum of two roots:

* ``G1`` solves ``G c = F1(G)``, ``F1(G) = sum_t (1 - P_E|t) P(Poisson(G/eta) >= t)``,
  ``c = 1 - Lambda_1 a - (1 - Lambda_1) a**2`` and ``a = P_E|1 (1 + e)``;
* ``G2`` solves ``f_s(f_b(0)) = a`` (infinite when ``Lambda_1 = 0``).

Since ``f_b(0) = eta Lambda_1``, the slot argument of the degree-1
constraint is ``G Lambda_1``.  The variant with argument ``G Lambda_1 / eta``
(``f_s`` evaluated at ``q = Lambda_1``) is available as
``g2_form="lambda1"``; it is smaller by the factor ``eta`` and is not a
valid converse in general (density evolution can exceed it), so it is
kept only for comparison.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gammainc

from . import csvio
from .density_evolution import DeParams, ErrorProfile, _fs, _Maps, run_de
from .errors import BracketInvalid, DomainViolation, NotFound, ValidationError
from .protocol import IrsaDistribution

ROOT_XTOL = 1e-13
# absolute slack on the convergence target; matters only when P_E|1 = 0
TARGET_ATOL = 1e-8


class ApproximateBoundaryWarning(UserWarning):
    """The e = 0 boundary is an approximation, not a guaranteed converse."""


# ---------------------------------------------------------------- threshold


@dataclass(frozen=True)
class ThresholdQuery:
    dist: IrsaDistribution
    errors: ErrorProfile
    e: float
    g_lo: float = 1e-3
    g_hi: float = 10.0
    g_tolerance: float = 1e-4
    sic_efficiency: float = 1.0

    def __post_init__(self):
        if not self.g_lo < self.g_hi:
            raise ValidationError("threshold: g_lo must be below g_hi")
        if self.g_lo <= 0:
            raise ValidationError("threshold: g_lo must be positive")
        if self.e < 0:
            raise ValidationError("threshold: e must be >= 0")
        if not self.g_tolerance > 0:
            raise ValidationError("threshold: g_tolerance must be positive")

    @property
    def target(self) -> float:
        return self.errors.pe1 * (1.0 + self.e)


def converges(dist, errors, g, e, sic_efficiency=1.0) -> bool:
    """Does density evolution at load ``g`` settle within ``P_E|1 (1 + e)``?"""
    params = DeParams(dist, errors, g, sic_efficiency)
    target = errors.pe1 * (1.0 + e) + TARGET_ATOL
    # same verdict as run_de: the clipped trajectory never rises, so it may
    # stop as soon as it reaches the target
    maps = _Maps(params)
    p = maps.fs(1.0)
    for _ in range(params.max_iters):
        if p <= target:
            return True
        p_new = min(maps.fs(maps.fb(p)), p)
        if abs(p_new - p) < params.fp_tolerance:
            return p_new <= target
        p = p_new
    return p <= target


def threshold_gmac(q: ThresholdQuery) -> float:
    """Bisection on the load with density evolution as the convergence oracle."""
    ok = lambda g: converges(q.dist, q.errors, g, q.e, q.sic_efficiency)
    lo_ok, hi_ok = ok(q.g_lo), ok(q.g_hi)
    if lo_ok == hi_ok:
        state = "converge" if lo_ok else "fail"
        raise BracketInvalid(f"threshold: both bracket ends {q.g_lo}, {q.g_hi} {state}")
    if not lo_ok:
        raise BracketInvalid("threshold: recursion fails at g_lo but converges at g_hi")
    lo, hi = q.g_lo, q.g_hi
    while hi - lo > q.g_tolerance:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    # verdict is re-checked at the returned point
    if not ok(lo):
        raise BracketInvalid("threshold: convergence verdict is not monotone in the load")
    return lo


# ---------------------------------------------------------------- onset of G0


def _max_h(maps: _Maps, lo: float, n_grid: int = 2000) -> float:
    grid = np.linspace(lo, 1.0, n_grid + 1)[1:]
    vals = np.array([maps.h(p) for p in grid])
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]
    if b > a:
        res = minimize_scalar(lambda p: -maps.h(p), bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        return max(vals[i], -res.fun)
    return vals[i]


def g0_onset(
    dist: IrsaDistribution,
    errors: ErrorProfile,
    g_hi: float,
    e_probe: float = 0.5,
    g_tol: float = 1e-4,
    sic_efficiency: float = 1.0,
) -> float:
    """Smallest load at which ``f_s(f_b(p)) - p`` gains a root above ``P_E|1 (1 + e_probe)``.

    Below the onset the map stays strictly under the diagonal on
    ``(P_E|1 (1 + e_probe), 1]``; the maximum of ``f_s(f_b(p)) - p`` there is
    nondecreasing in the load, so the onset is found by bisection on its sign.
    """
    if not g_hi > 0:
        raise ValidationError("g0_onset: g_hi must be positive")
    lo_p = errors.pe1 * (1.0 + e_probe)
    if lo_p >= 1.0:
        raise NotFound("g0_onset: probe interval above P_E|1 (1 + e) is empty")

    def crossed(g):
        return _max_h(_Maps(DeParams(dist, errors, g, sic_efficiency)), lo_p) >= 0.0

    if not crossed(g_hi):
        raise NotFound(f"g0_onset: no second fixed point up to g = {g_hi}")
    lo, hi = 0.0, g_hi
    while hi - lo > g_tol:
        mid = 0.5 * (lo + hi)
        if crossed(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------- boundaries


def _gammainc_sum(x: float, weights) -> float:
    t = np.arange(1, len(weights) + 1)
    return float(np.dot(weights, gammainc(t, x)))


def boundary_collision(eta: float, t_mpr: int) -> float:
    """Collision-channel convergence boundary for protocols without degree-1 users.

    Positive root of ``G/T = 1 - (1/T) exp(-G/eta) sum_{k<T} (T-k)/k! (G/eta)^k``.
    """
    if not 0.0 < eta <= 1.0:
        raise ValidationError("eta must lie in (0, 1]")
    if t_mpr < 1:
        raise ValidationError("t_mpr must be >= 1")
    T = t_mpr

    def rhs(g):
        x = g / eta
        term, acc = math.exp(-x), 0.0
        for k in range(T):
            if k:
                term *= x / k
            acc += (T - k) * term
        return 1.0 - acc / T

    # phi(G) = rhs(G)/G - 1/T is decreasing (rhs concave through the origin)
    def phi(g):
        return rhs(g) / g - 1.0 / T

    lo, hi = 1e-9, 1.5 * T + 10.0
    if phi(lo) <= 0.0:
        return 0.0
    if phi(hi) >= 0.0:
        raise BracketInvalid("boundary_collision: upper bracket does not enclose the root")
    return brentq(phi, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)


class Binding(enum.Enum):
    G1 = "G1"
    G2 = "G2"


@dataclass(frozen=True)
class BoundaryQuery:
    eta: float
    lambda1: float
    errors: ErrorProfile
    e: float

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError("boundary: eta must lie in (0, 1]")
        if not 0.0 <= self.lambda1 < 1.0:
            raise ValidationError("boundary: lambda1 must lie in [0, 1)")
        if self.e < 0:
            raise ValidationError("boundary: e must be >= 0")

    @property
    def t_mpr(self) -> int:
        return self.errors.t_mpr

    @property
    def target(self) -> float:
        return self.errors.pe1 * (1.0 + self.e)

    @property
    def area_coefficient(self) -> float:
        a = self.target
        return 1.0 - self.lambda1 * a - (1.0 - self.lambda1) * a * a

    @property
    def eta_cap(self) -> float:
        return (1.0 - self.errors.pe1) / self.area_coefficient


@dataclass(frozen=True)
class BoundaryResult:
    g_cb: float
    binding: Binding
    g1: float
    g2: float
    approximate: bool = False


def _check_domain(q: BoundaryQuery):
    if q.target >= 0.5:
        raise DomainViolation(f"P_E|1 (1 + e) = {q.target!r} must be below 0.5 for the area bound")
    if q.eta > q.eta_cap * (1.0 + 1e-12):
        raise DomainViolation(f"eta = {q.eta!r} exceeds the admissible cap {q.eta_cap!r}")


def boundary_g1(q: BoundaryQuery) -> float:
    _check_domain(q)
    c = q.area_coefficient
    w = np.array([1.0 - p for p in q.errors.probs])

    # F1(G)/G - c is decreasing since F1 is concave with F1(0) = 0
    def phi(g):
        return _gammainc_sum(g / q.eta, w) / g - c

    lo = 1e-9
    hi = max(1.5 * q.t_mpr + 10.0, 2.0 * q.t_mpr / c)
    if phi(lo) <= 0.0:
        return 0.0
    if phi(hi) >= 0.0:
        raise BracketInvalid("boundary: upper bracket does not enclose the G1 root")
    return brentq(phi, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)


G2_FORMS = ("fb0", "lambda1")


def _g2_scale(q: BoundaryQuery, form: str) -> float:
    """Load per unit of the Poisson argument ``y`` in the degree-1 constraint."""
    if form == "fb0":
        return 1.0 / q.lambda1
    if form == "lambda1":
        return q.eta / q.lambda1
    raise ValidationError(f"g2_form must be one of {G2_FORMS}")


def boundary_g2(q: BoundaryQuery, form: str = "fb0") -> float:
    """Root of the degree-1 qualifying constraint; ``inf`` when ``Lambda_1 = 0``."""
    _check_domain(q)
    if q.lambda1 == 0.0:
        return math.inf
    a = q.target
    w = [1.0 - p for p in q.errors.probs]
    scale = _g2_scale(q, form)
    # f_s-form in the Poisson argument y, increasing from P_E|1 toward 1
    f = lambda y: _fs(1.0, y, 1.0, w) - a
    if f(0.0) >= 0.0:
        return 0.0
    y_hi = 50.0 + 4.0 * q.t_mpr
    while f(y_hi) <= 0.0:
        y_hi *= 2.0
    y = brentq(f, 0.0, y_hi, xtol=ROOT_XTOL)
    return y * scale


def boundary_gmac(q: BoundaryQuery, g2_form: str = "fb0") -> BoundaryResult:
    """Convergence boundary ``min(G1, G2)`` and which of the two binds."""
    approximate = q.e == 0.0
    if approximate:
        warnings.warn("boundary with e = 0 is an approximation and not guaranteed to be a bound",
                      ApproximateBoundaryWarning, stacklevel=2)
    g1 = boundary_g1(q)
    g2 = boundary_g2(q, g2_form)
    if g2 < g1:
        return BoundaryResult(g2, Binding.G2, g1, g2, approximate)
    return BoundaryResult(g1, Binding.G1, g1, g2, approximate)


def boundary_for(dist: IrsaDistribution, errors: ErrorProfile, e: float, g2_form: str = "fb0") -> BoundaryResult:
    return boundary_gmac(BoundaryQuery(dist.efficiency, dist.lambda1, errors, e), g2_form)


def boundary_sweep_rows(xs, queries):
    rows = []
    for x, q in zip(xs, queries):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ApproximateBoundaryWarning)
            r = boundary_gmac(q)
        rows.append((x, r.g_cb, r.binding.value))
    return rows


def write_boundary_sweep(path, x_name, xs, queries):
    return csvio.write_csv(path, [x_name, "g_cb", "binding"], boundary_sweep_rows(xs, queries))


# ---------------------------------------------------------------- area test


def fs_integral(errors: ErrorProfile, g: float, eta: float) -> float:
    """Closed form of the integral of ``f_s`` over [0, 1] (perfect SIC)."""
    if not g > 0:
        raise ValidationError("g must be positive")
    x = g / eta
    w = np.array([1.0 - p for p in errors.probs])
    return 1.0 - _gammainc_sum(x, w) / x


def open_tunnel_check(
    dist: IrsaDistribution,
    errors: ErrorProfile,
    g: float,
    e: float,
    qualifying: bool = True,
    g2_form: str = "fb0",
) -> bool:
    """Necessary condition for the recursion to settle within ``P_E|1 (1 + e)``.

    The area test is
    ``int f_s + eta - eta [Lambda_1 a + (1 - Lambda_1) a**2] <= 1``.  With
    ``qualifying`` the degree-1 constraint ``f_s(q2) <= a`` is also required
    (the degree-1 half of the same converse), so the predicate is false
    everywhere above the full convergence boundary.
    """
    a = errors.pe1 * (1.0 + e)
    if a >= 0.5:
        raise DomainViolation(f"P_E|1 (1 + e) = {a!r} must be below 0.5")
    eta, l1 = dist.efficiency, dist.lambda1
    area = fs_integral(errors, g, eta) + eta - eta * (l1 * a + (1.0 - l1) * a * a)
    if area > 1.0:
        return False
    if qualifying and l1 > 0.0:
        y = g / _g2_scale(BoundaryQuery(eta, l1, errors, e), g2_form)
        if _fs(1.0, y, 1.0, [1.0 - p for p in errors.probs]) > a:
            return False
    return True


def floor_bound(dist: IrsaDistribution, p_e1: float, e: float) -> float:
    """Packet-loss lower bound ``sum_d Lambda_d [P_E|1 (1 + e)]**d`` above the boundary."""
    if not 0.0 <= p_e1 <= 1.0:
        raise ValidationError("p_e1 must be a probability")
    if e < 0:
        raise ValidationError("e must be >= 0")
    return dist.pgf(p_e1 * (1.0 + e))
