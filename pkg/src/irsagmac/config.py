"""INI experiment configs: one ``[run]`` section naming the command plus one section per module.

Values are checked when the file is loaded; every module-level invariant is
re-validated by constructing the corresponding objects, and errors name the
offending ``[section] key``.  Power ratios (snr, Eb/N0) need an explicit
``dB`` or ``lin`` suffix; bare numbers are rejected as ambiguous.
"""
from __future__ import annotations

import configparser
import enum
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .density_evolution import ErrorProfile
from .errors import ConfigParseError, ValidationError
from .montecarlo import COUPLINGS
from .protocol import IrsaDistribution
from .threshold import G2_FORMS
from .tradeoff import E_GRID, EBNO_BRACKET, PhyOption


class Command(enum.Enum):
    DE = "de"
    EXIT_CHART = "exit_chart"
    THRESHOLD = "threshold"
    BOUNDARY = "boundary"
    MONTE_CARLO = "montecarlo"
    TRADEOFF = "tradeoff"
    ESTIMATORS = "estimators"


_LEVEL = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(db|lin)\s*$", re.IGNORECASE)


def parse_level_db(text: str, where: str) -> float:
    """``"7 dB"`` -> 7.0, ``"5 lin"`` -> 6.99 (dB); bare numbers are ambiguous."""
    m = _LEVEL.match(text)
    if not m:
        raise ConfigParseError(f"{where}: {text!r} needs an explicit unit suffix 'dB' or 'lin'")
    v = float(m.group(1))
    if m.group(2).lower() == "db":
        return v
    if not v > 0:
        raise ValidationError(f"{where}: linear value must be positive")
    return 10.0 * math.log10(v)


class Section:
    """Typed access to one INI section; keys never read are reported as unknown."""

    def __init__(self, cp: configparser.ConfigParser, name: str, required: bool = True):
        self.name = name
        self.present = cp.has_section(name)
        if required and not self.present:
            raise ConfigParseError(f"missing section [{name}]")
        self._items = dict(cp.items(name)) if self.present else {}
        self._used: set[str] = set()

    def where(self, key: str) -> str:
        return f"[{self.name}] {key}"

    def _raw(self, key, default):
        self._used.add(key)
        if key in self._items:
            return self._items[key]
        if default is _REQUIRED:
            raise ConfigParseError(f"{self.where(key)}: missing required key")
        return default

    def has(self, key: str) -> bool:
        return key in self._items

    def str(self, key, default=None):
        v = self._raw(key, _REQUIRED if default is _REQUIRED else default)
        return v.strip() if isinstance(v, str) else v

    def float(self, key, default=None):
        v = self._raw(key, default)
        if not isinstance(v, str):
            return v
        try:
            return float(v)
        except ValueError as exc:
            raise ConfigParseError(f"{self.where(key)}: {v!r} is not a number") from exc

    def int(self, key, default=None):
        v = self._raw(key, default)
        if not isinstance(v, str):
            return v
        try:
            return int(v)
        except ValueError as exc:
            raise ConfigParseError(f"{self.where(key)}: {v!r} is not an integer") from exc

    def bool(self, key, default=False):
        v = self._raw(key, default)
        if not isinstance(v, str):
            return v
        s = v.strip().lower()
        if s in ("1", "yes", "true", "on"):
            return True
        if s in ("0", "no", "false", "off"):
            return False
        raise ConfigParseError(f"{self.where(key)}: {v!r} is not a boolean")

    def floats(self, key, default=None):
        v = self._raw(key, default)
        if not isinstance(v, str):
            return v
        try:
            return tuple(float(x) for x in re.split(r"[,\s]+", v.strip()) if x)
        except ValueError as exc:
            raise ConfigParseError(f"{self.where(key)}: {v!r} is not a list of numbers") from exc

    def ints(self, key, default=None):
        vals = self.floats(key, default)
        if vals is None:
            return None
        if any(x != int(x) for x in vals):
            raise ConfigParseError(f"{self.where(key)}: entries must be integers")
        return tuple(int(x) for x in vals)

    def level_db(self, key, default=None):
        v = self._raw(key, default)
        return parse_level_db(v, self.where(key)) if isinstance(v, str) else v

    def finish(self):
        unknown = sorted(set(self._items) - self._used)
        if unknown:
            raise ConfigParseError(f"[{self.name}]: unknown key(s) {', '.join(unknown)}")


_REQUIRED = object()


def _validated(where: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------- typed parameters


@dataclass(frozen=True)
class ProtocolParams:
    dist: IrsaDistribution | None
    profiles: tuple[ErrorProfile, ...]

    @property
    def t_values(self) -> tuple[int, ...]:
        return tuple(p.t_mpr for p in self.profiles)


def _protocol(cp, need_dist=True) -> ProtocolParams:
    sec = Section(cp, "protocol")
    dist = None
    text = sec.str("lambda", _REQUIRED if need_dist else None)
    if text is not None:
        dist = _validated(sec.where("lambda"), IrsaDistribution.parse, text)
    t_vals = sec.ints("t_mpr")
    sec.finish()
    err = Section(cp, "errors", required=False)
    pe = err.floats("pe", (0.0,))
    err.finish()
    if len(pe) > 1:
        if t_vals is not None and t_vals != (len(pe),):
            raise ValidationError("[errors] pe: explicit profile length must equal [protocol] t_mpr")
        profiles = (_validated(err.where("pe"), ErrorProfile, pe),)
    else:
        if not t_vals:
            raise ConfigParseError("[protocol] t_mpr: missing required key")
        if any(t < 1 for t in t_vals):
            raise ValidationError("[protocol] t_mpr: entries must be >= 1")
        profiles = tuple(_validated(err.where("pe"), ErrorProfile.uniform, t, pe[0]) for t in t_vals)
    return ProtocolParams(dist, profiles)


@dataclass(frozen=True)
class DeJob:
    protocol: ProtocolParams
    g: tuple[float, ...]
    sic_efficiency: float = 1.0
    max_iters: int = 10_000
    fp_tolerance: float = 1e-12
    trajectories: bool = False


@dataclass(frozen=True)
class ExitJob:
    protocol: ProtocolParams
    g: tuple[float, ...]
    samples: int = 101


@dataclass(frozen=True)
class ThresholdJob:
    protocol: ProtocolParams
    e: float
    g_lo: float
    g_hi: float
    g_tolerance: float
    onset: bool
    e_probe: float


@dataclass(frozen=True)
class BoundaryJob:
    protocol: ProtocolParams
    eta: tuple[float, ...]
    lambda1: float
    e: float
    g2_form: str


@dataclass(frozen=True)
class MonteCarloJob:
    protocol: ProtocolParams
    n_slots: int
    g: tuple[float, ...]
    n_frames: int
    coupling: str
    load: str
    k_users: int | None
    max_sic_iters: int | None
    de_curve: bool


@dataclass(frozen=True)
class TradeoffJob:
    protocol: ProtocolParams
    mode: str
    log2_m: float
    eps: float
    phy_option: PhyOption
    lambda1: tuple[float, ...] | None
    eta_max: float | None
    s_grid: tuple[float, ...] | None
    ka_grid: tuple[float, ...] | None
    frame_n: int | None
    redundancy_r: float | None
    e_grid: tuple[float, ...]
    n_grid: tuple[int, ...] | None
    rate_multiplier: float | None
    simplified_e0: bool
    ebno_bracket: tuple[float, float]
    reference: str | None


@dataclass(frozen=True)
class EstimatorsJob:
    n: int
    snr_db: float
    t: tuple[int, ...]
    n_pilots: tuple[int, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    command: Command
    job: object
    seed: int = 0
    output: str = ""
    source_text: str = field(default="", repr=False)
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()


def _de(cp):
    proto = _protocol(cp)
    s = Section(cp, "de")
    job = DeJob(proto, s.floats("g", _REQUIRED), s.float("sic_efficiency", 1.0), s.int("max_iters", 10_000),
                s.float("fp_tolerance", 1e-12), s.bool("trajectories", False))
    s.finish()
    if any(g <= 0 for g in job.g):
        raise ValidationError("[de] g: loads must be positive")
    if not 0.0 < job.sic_efficiency <= 1.0:
        raise ValidationError("[de] sic_efficiency: must lie in (0, 1]")
    return job


def _exit(cp):
    proto = _protocol(cp)
    s = Section(cp, "exit_chart")
    job = ExitJob(proto, s.floats("g", _REQUIRED), s.int("samples", 101))
    s.finish()
    if any(g <= 0 for g in job.g):
        raise ValidationError("[exit_chart] g: loads must be positive")
    if job.samples < 2:
        raise ValidationError("[exit_chart] samples: must be >= 2")
    return job


def _threshold(cp):
    proto = _protocol(cp)
    s = Section(cp, "threshold")
    job = ThresholdJob(proto, s.float("e", _REQUIRED), s.float("g_lo", 1e-3), s.float("g_hi", 10.0),
                       s.float("g_tolerance", 1e-4), s.bool("onset", True), s.float("e_probe", 0.5))
    s.finish()
    if job.e < 0:
        raise ValidationError("[threshold] e: must be >= 0")
    if not 0 < job.g_lo < job.g_hi:
        raise ValidationError("[threshold] g_lo, g_hi: need 0 < g_lo < g_hi")
    return job


def _boundary(cp):
    proto = _protocol(cp, need_dist=False)
    s = Section(cp, "boundary")
    job = BoundaryJob(proto, s.floats("eta", _REQUIRED), s.float("lambda1", 0.0), s.float("e", _REQUIRED),
                      s.str("g2_form", "fb0"))
    s.finish()
    if any(not 0 < x <= 1 for x in job.eta):
        raise ValidationError("[boundary] eta: entries must lie in (0, 1]")
    if not 0 <= job.lambda1 < 1:
        raise ValidationError("[boundary] lambda1: must lie in [0, 1)")
    if job.e < 0:
        raise ValidationError("[boundary] e: must be >= 0")
    if job.g2_form not in G2_FORMS:
        raise ValidationError(f"[boundary] g2_form: must be one of {G2_FORMS}")
    return job


def _montecarlo(cp):
    proto = _protocol(cp)
    s = Section(cp, "montecarlo")
    job = MonteCarloJob(proto, s.int("n_slots", _REQUIRED), s.floats("g", _REQUIRED), s.int("n_frames", _REQUIRED),
                        s.str("coupling", "slot"), s.str("load", "fixed"), s.int("k_users", None),
                        s.int("max_sic_iters", None), s.bool("de_curve", False))
    s.finish()
    if job.n_slots < 1 or job.n_frames < 1:
        raise ValidationError("[montecarlo] n_slots, n_frames: must be >= 1")
    if any(g <= 0 for g in job.g):
        raise ValidationError("[montecarlo] g: loads must be positive")
    if job.coupling not in COUPLINGS:
        raise ValidationError(f"[montecarlo] coupling: must be one of {sorted(COUPLINGS)}")
    if job.load not in ("fixed", "bernoulli"):
        raise ValidationError("[montecarlo] load: must be 'fixed' or 'bernoulli'")
    if job.load == "bernoulli" and (job.k_users is None or job.k_users < 1):
        raise ValidationError("[montecarlo] k_users: required (>= 1) for bernoulli load")
    if proto.dist.dmax > job.n_slots:
        raise ValidationError("[montecarlo] n_slots: fewer slots than the maximum degree")
    return job


def _tradeoff(cp):
    s = Section(cp, "tradeoff")
    mode = s.str("mode", "achievable")
    if mode not in ("achievable", "boundary"):
        raise ValidationError("[tradeoff] mode: must be 'achievable' or 'boundary'")
    proto = _protocol(cp, need_dist=mode == "achievable")
    try:
        phy = PhyOption(s.str("phy_option", "Option1"))
    except ValueError as exc:
        raise ValidationError(f"[tradeoff] phy_option: must be one of {[o.value for o in PhyOption]}") from exc
    lo = s.level_db("ebno_lo", EBNO_BRACKET[0])
    hi = s.level_db("ebno_hi", EBNO_BRACKET[1])
    job = TradeoffJob(
        proto, mode, s.float("log2_m", _REQUIRED), s.float("eps", _REQUIRED), phy,
        s.floats("lambda1", None), s.float("eta_max", None), s.floats("s_grid", None), s.floats("ka_grid", None),
        s.int("frame_n", None), s.float("redundancy_r", None), s.floats("e_grid", E_GRID), s.ints("n_grid", None),
        s.float("rate_multiplier", None), s.bool("simplified_e0", False), (lo, hi), s.str("reference", None),
    )
    s.finish()
    if (job.s_grid is None) == (job.ka_grid is None):
        raise ValidationError("[tradeoff] s_grid, ka_grid: give exactly one")
    if job.ka_grid is not None and job.frame_n is None:
        raise ValidationError("[tradeoff] frame_n: required with ka_grid")
    if mode == "boundary" and job.lambda1 is None:
        raise ValidationError("[tradeoff] lambda1: required in boundary mode")
    return job


def _estimators(cp):
    s = Section(cp, "estimators")
    job = EstimatorsJob(s.int("n", _REQUIRED), s.level_db("snr", _REQUIRED), s.ints("t", (0, 1, 2, 3, 4)),
                        s.ints("n_pilots", (1, 6, 12)))
    s.finish()
    if job.n < 1:
        raise ValidationError("[estimators] n: must be >= 1")
    if any(t < 0 for t in job.t) or any(p < 1 for p in job.n_pilots):
        raise ValidationError("[estimators] t, n_pilots: t >= 0 and n_pilots >= 1")
    return job


_BUILDERS = {
    Command.DE: _de,
    Command.EXIT_CHART: _exit,
    Command.THRESHOLD: _threshold,
    Command.BOUNDARY: _boundary,
    Command.MONTE_CARLO: _montecarlo,
    Command.TRADEOFF: _tradeoff,
    Command.ESTIMATORS: _estimators,
}


def parse_config(text: str, base_dir: Path = Path(".")) -> ExperimentConfig:
    if not text.strip():
        raise ConfigParseError("config is empty")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(f"malformed config: {exc}") from exc
    run = Section(cp, "run")
    name = run.str("command", _REQUIRED)
    try:
        command = Command(name)
    except ValueError as exc:
        raise ConfigParseError(f"[run] command: {name!r} is not one of {[c.value for c in Command]}") from exc
    seed = run.int("seed", 0)
    output = run.str("output", command.value)
    run.finish()
    known = {"run", _section_of(command), "protocol", "errors"}
    extra = sorted(set(cp.sections()) - known)
    if extra:
        raise ConfigParseError(f"section(s) not used by command {command.value!r}: {', '.join(extra)}")
    job = _BUILDERS[command](cp)
    return ExperimentConfig(command, job, seed, output, text, base_dir)


def _section_of(command: Command) -> str:
    return command.value


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, path.parent)
