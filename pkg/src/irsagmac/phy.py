"""PHY-layer slot-decoding error models.

Option 1 is an unsourced Gaussian MAC code with t-user decoding; its
message-error bound ``F1`` is pluggable, and the union bound turns it into a
decoding-error profile.  Option 2 (BPR outer code plus binary linear inner
code) sees a binary-input modulo-2 AWGN channel for T > 1 and a plain AWGN
channel for T = 1; both use the normal approximation with the
``log2(n) / (2n)`` correction.  Estimation of the number of packets in a
slot (energy-based or pilot-based) adds its own failure probability.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Mapping, Protocol

import numpy as np
from scipy.special import erfc, gammainc, gammaincc, logsumexp

from . import csvio
from .density_evolution import ErrorProfile
from .errors import IntegrationFailure, SurrogateUnavailable, ValidationError

LOG2E = math.log2(math.e)
QUAD_RTOL = 1e-9


def q_func(x: float) -> float:
    """Gaussian tail ``Q(x) = erfc(x / sqrt 2) / 2``."""
    return 0.5 * float(erfc(x / math.sqrt(2.0)))


def db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


def lin_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class PhyConfig:
    n: int
    log2_m: float
    redundancy_r: float
    t_mpr: int
    snr: float
    n_pilots: int = 0

    def __post_init__(self):
        if not self.n > self.n_pilots >= 0:
            raise ValidationError("phy: need n > n_pilots >= 0")
        if self.log2_m < 1:
            raise ValidationError("phy: log2_m must be >= 1")
        if self.redundancy_r < 0:
            raise ValidationError("phy: redundancy_r must be >= 0")
        if self.t_mpr < 1:
            raise ValidationError("phy: t_mpr must be >= 1")
        if not self.snr > 0:
            raise ValidationError("phy: snr must be positive")

    @property
    def n_eff(self) -> int:
        """Channel uses left for data once pilots are placed."""
        return self.n - self.n_pilots

    @property
    def log2_m_prime_option1(self) -> float:
        return self.log2_m + self.redundancy_r

    @property
    def log2_m_prime_option2(self) -> float:
        return self.log2_m * self.t_mpr + self.redundancy_r


def default_redundancy(eps: float) -> int:
    """Parity bits keeping undetected errors an order of magnitude below ``eps``."""
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0, 1)")
    return math.ceil(math.log2(10.0 / eps))


# ---------------------------------------------------------------- channel stats


@dataclass(frozen=True)
class ChannelStats:
    capacity: float
    dispersion: float

    def __post_init__(self):
        if self.capacity < 0 or self.dispersion < 0:
            raise ValidationError("capacity and dispersion must be non-negative")


def awgn_stats(snr: float) -> ChannelStats:
    if not snr > 0:
        raise ValidationError("snr must be positive")
    c = 0.5 * math.log2(1.0 + snr)
    # dispersion in bits^2, the unit of Var[i] used for the modulo-2 channel
    v = 0.5 * LOG2E * LOG2E * (snr + 2.0) * snr / (snr + 1.0) ** 2
    return ChannelStats(c, v)


def _n_images(sigma: float) -> int:
    return math.ceil(6.0 * sigma / 2.0) + 1


def wrapped_log_density(x, sigma: float):
    """log of the modulo-2 wrapped Gaussian density on [0, 2).

    Image terms are added symmetrically until the next pair falls below
    1e-16 of the running sum, with at least ``ceil(6 sigma / 2) + 1`` per side.
    """
    x = np.asarray(x, dtype=float)
    m = _n_images(sigma)
    while True:
        # farthest image from any x in [-1, 2) is about 2m - 2 away
        edge = (2.0 * m - 2.0) / sigma
        if edge > 0 and -0.5 * edge * edge < math.log(1e-16) - 1.0:
            break
        m += 1
    k = np.arange(-m, m + 1)
    z = (x[..., None] - 2.0 * k) / sigma
    return logsumexp(-0.5 * z * z, axis=-1) - math.log(math.sqrt(2.0 * math.pi) * sigma)


def wrapped_density(x, sigma: float):
    return np.exp(wrapped_log_density(x, sigma))


def mod2_sigma(snr: float) -> float:
    """Standard deviation of the folded noise, ``sigma'^2 = sigma^2 / (4P)``."""
    return math.sqrt(1.0 / (4.0 * snr))


def mod2_information_density(x, sigma: float):
    """``i(x) = log2(2 f(x) / (f(x) + f(x - 1)))`` in bits."""
    x = np.asarray(x, dtype=float)
    lf = wrapped_log_density(x, sigma)
    lf1 = wrapped_log_density(x - 1.0, sigma)
    return 1.0 - np.logaddexp(0.0, lf1 - lf) * LOG2E


MAX_TRAPEZOID_POINTS = 1 << 22


@functools.lru_cache(maxsize=4096)
def _mod2_stats_cached(snr: float) -> tuple[float, float]:
    """First two moments of ``i(z~)`` by the periodic trapezoid rule.

    The integrand is smooth and 2-periodic, so the rule converges
    exponentially; the point count doubles until two successive estimates of
    both moments agree to ``QUAD_RTOL``.
    """
    sigma = mod2_sigma(snr)
    n = max(256, 1 << max(0, math.ceil(math.log2(40.0 / sigma))))
    prev = None
    while n <= MAX_TRAPEZOID_POINTS:
        # one period centred on the noise peak
        x = -1.0 + 2.0 * np.arange(n) / n
        w = wrapped_density(x, sigma) * (2.0 / n)
        i = mod2_information_density(x, sigma)
        cur = np.array([np.dot(w, i), np.dot(w, i * i)])
        if prev is not None and np.all(np.abs(cur - prev) <= QUAD_RTOL * np.maximum(np.abs(cur), 1e-300) + 1e-15):
            c = min(1.0, max(0.0, float(cur[0])))
            return c, max(0.0, float(cur[1]) - c * c)
        prev = cur
        n *= 2
    raise IntegrationFailure(f"mod2_stats: no convergence to {QUAD_RTOL} relative at snr={snr}")


def mod2_stats(snr: float) -> ChannelStats:
    """Capacity and dispersion of the binary-input modulo-2 AWGN channel."""
    if not snr > 0:
        raise ValidationError("snr must be positive")
    c, v = _mod2_stats_cached(float(snr))
    return ChannelStats(c, v)


def normal_approx_pe(stats: ChannelStats, n_eff: int, log2_m_prime: float) -> float:
    """``Q[sqrt(n/V) (C - log2 M'/n + log2(n)/(2n))]`` clamped to [0, 1]."""
    if n_eff < 2:
        raise ValidationError("n_eff must be >= 2")
    n = float(n_eff)
    margin = stats.capacity - log2_m_prime / n + math.log2(n) / (2.0 * n)
    if stats.dispersion == 0.0:
        return 0.0 if margin > 0 else 1.0
    return min(1.0, max(0.0, q_func(math.sqrt(n / stats.dispersion) * margin)))


def stats_rows(snr_values, stats_fn=awgn_stats):
    return [(lin_to_db(s), st.capacity, st.dispersion) for s in snr_values for st in [stats_fn(s)]]


def write_stats_csv(path, snr_values, stats_fn=awgn_stats):
    return csvio.write_csv(path, ["snr_db", "C", "V"], stats_rows(snr_values, stats_fn))


# ---------------------------------------------------------------- option 1


class F1Model(Protocol):
    """Per-user message-error probability with ``t`` users sharing a slot."""

    def __call__(self, n: int, log2_m_prime: float, snr: float, t: int) -> float: ...


@dataclass(frozen=True)
class SumRateNormalApprox:
    """Default stand-in for the t-user random-coding bound.

    Treats the t users as one AWGN code of sum rate ``t log2 M' / n`` at
    received SNR ``t P / sigma^2`` and applies the normal approximation.  At
    t = 1 it coincides with the single-user AWGN normal approximation.
    """

    max_t: int | None = None

    def __call__(self, n, log2_m_prime, snr, t):
        if t < 1 or (self.max_t is not None and t > self.max_t):
            raise SurrogateUnavailable(f"surrogate covers t <= {self.max_t}, asked for t = {t}")
        return normal_approx_pe(awgn_stats(t * snr), n, t * log2_m_prime)


@dataclass(frozen=True)
class TabulatedF1:
    """Fixed per-t values (e.g. read from an external bound evaluation)."""

    values: Mapping[int, float]

    def __call__(self, n, log2_m_prime, snr, t):
        if t not in self.values:
            raise SurrogateUnavailable(f"no tabulated F1 value for t = {t}")
        return float(self.values[t])


def _running_max(values):
    out, m = [], 0.0
    for v in values:
        m = max(m, v)
        out.append(m)
    return tuple(out)


def option1_profile(cfg: PhyConfig, surrogate: F1Model | None = None) -> ErrorProfile:
    """Union bound ``P_E|t = min(1, t F1(n, M', P/sigma^2, t))`` made nondecreasing in t."""
    f1 = surrogate or SumRateNormalApprox()
    lm = cfg.log2_m_prime_option1
    raw = [min(1.0, t * f1(cfg.n_eff, lm, cfg.snr, t)) for t in range(1, cfg.t_mpr + 1)]
    return ErrorProfile(_running_max(raw))


# ---------------------------------------------------------------- option 2


def option2_pe(cfg: PhyConfig, rate_multiplier: float = 1.0) -> float:
    """Common slot error probability of the BPR-based scheme.

    ``rate_multiplier`` divides ``log2 M' = kT + r``; it models multilayer
    variants that split the payload over several modulo-2 layers.
    """
    if not rate_multiplier > 0:
        raise ValidationError("rate_multiplier must be positive")
    lm = cfg.log2_m_prime_option2 / rate_multiplier
    if cfg.t_mpr == 1:
        return normal_approx_pe(awgn_stats(cfg.snr), cfg.n_eff, lm)
    pe = normal_approx_pe(mod2_stats(cfg.snr), cfg.n_eff, lm)
    # binary codebook of length n holds at most 2^n words; the normal
    # approximation alone lets rates above 1 bit per use through at high snr
    if lm > cfg.n_eff:
        pe = max(pe, -math.expm1((cfg.n_eff - lm) * math.log(2.0)))
    return pe


def option2_profile(cfg: PhyConfig, rate_multiplier: float = 1.0) -> ErrorProfile:
    return ErrorProfile.uniform(cfg.t_mpr, option2_pe(cfg, rate_multiplier))


# ---------------------------------------------------------------- estimators


def energy_estimator_failure(t: int, snr: float, n: int) -> float:
    """Probability that the energy detector misjudges ``t`` packets in a slot.

    ``||Y||^2 ~ (sigma^2 + t P) chi^2(n)``; the decision regions have
    half-width ``n P / 2`` around ``n (sigma^2 + t P)``.
    """
    if t < 0:
        raise ValidationError("t must be >= 0")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if not snr > 0:
        raise ValidationError("snr must be positive")
    scale = 1.0 + t * snr
    hi = n * (scale + snr / 2.0) / scale
    lo = n * (scale - snr / 2.0) / scale
    p_hi = float(gammaincc(n / 2.0, hi / 2.0))
    p_lo = float(gammainc(n / 2.0, lo / 2.0)) if lo > 0 else 0.0
    return min(1.0, p_hi + p_lo)


def pilot_estimator_failure(n_pilots: int, snr: float) -> float:
    """``erfc(sqrt(n_p P / (8 sigma^2)))``, independent of the packet count."""
    if n_pilots < 1:
        raise ValidationError("n_pilots must be >= 1")
    if not snr > 0:
        raise ValidationError("snr must be positive")
    return float(erfc(math.sqrt(n_pilots * snr / 8.0)))


class EstimatorKind(enum.Enum):
    PERFECT = "Perfect"
    ENERGY_BASED = "EnergyBased"
    PILOT_BASED = "PilotBased"


@dataclass(frozen=True)
class EstimatorModel:
    kind: EstimatorKind
    failure_probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.failure_probs)
        object.__setattr__(self, "failure_probs", probs)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValidationError("estimator.failure_probs must be probabilities")
        if self.kind is EstimatorKind.PERFECT and any(probs):
            raise ValidationError("perfect estimator must have zero failure probabilities")
        if self.kind is EstimatorKind.PILOT_BASED and len(set(probs)) > 1:
            raise ValidationError("pilot-based failure probability cannot depend on t")

    @classmethod
    def perfect(cls, t_mpr: int) -> "EstimatorModel":
        return cls(EstimatorKind.PERFECT, (0.0,) * t_mpr)

    @classmethod
    def energy(cls, t_mpr: int, snr: float, n: int) -> "EstimatorModel":
        return cls(EstimatorKind.ENERGY_BASED, tuple(energy_estimator_failure(t, snr, n) for t in range(1, t_mpr + 1)))

    @classmethod
    def pilot(cls, t_mpr: int, n_pilots: int, snr: float) -> "EstimatorModel":
        return cls(EstimatorKind.PILOT_BASED, (pilot_estimator_failure(n_pilots, snr),) * t_mpr)

    @classmethod
    def for_config(cls, kind: EstimatorKind, cfg: PhyConfig) -> "EstimatorModel":
        if kind is EstimatorKind.PERFECT:
            return cls.perfect(cfg.t_mpr)
        if kind is EstimatorKind.ENERGY_BASED:
            return cls.energy(cfg.t_mpr, cfg.snr, cfg.n)
        return cls.pilot(cfg.t_mpr, cfg.n_pilots, cfg.snr)


def effective_profile(base: ErrorProfile, est: EstimatorModel, cfg: PhyConfig | None = None) -> ErrorProfile:
    """Fold estimation failures into the decoding-error profile.

    ``base`` must already be evaluated at the data blocklength ``n - n_p``.
    Each entry becomes ``F + P_F|t (1 - F)``; the result is made
    nondecreasing in t by a running maximum.
    """
    if len(est.failure_probs) != base.t_mpr:
        raise ValidationError("estimator and base profile disagree on T")
    if cfg is not None and cfg.t_mpr != base.t_mpr:
        raise ValidationError("phy config and base profile disagree on T")
    if est.kind is EstimatorKind.PERFECT:
        return base
    vals = [f + pf * (1.0 - f) for f, pf in zip(base.probs, est.failure_probs)]
    return ErrorProfile(_running_max(vals))


# ---------------------------------------------------------------- energy units


def snr_from_ebno(ebno_db: float, eta: float, log2_m: float, n: float) -> float:
    """``P / sigma^2 = (2 eta log2 M / n) Eb/N0``."""
    if not (eta > 0 and log2_m > 0 and n > 0):
        raise ValidationError("eta, log2_m and n must be positive")
    return 2.0 * eta * log2_m / n * db_to_lin(ebno_db)


def ebno_from_snr(snr: float, eta: float, log2_m: float, n: float) -> float:
    if not (snr > 0 and eta > 0 and log2_m > 0 and n > 0):
        raise ValidationError("snr, eta, log2_m and n must be positive")
    return lin_to_db(snr * n / (2.0 * eta * log2_m))


