"""Exception hierarchy shared by the analysis, simulation and CLI layers."""


class IrsaError(Exception):
    """Base class for every error raised by :mod:`irsagmac`."""

    category = "error"


class ValidationError(IrsaError, ValueError):
    """An input violates a documented invariant (probabilities, monotonicity, ranges)."""

    category = "validation"


class ConfigParseError(IrsaError):
    category = "config_parse"


class BracketInvalid(IrsaError):
    """Both ends of a load bracket give the same convergence verdict."""

    category = "bracket_invalid"


class DomainViolation(IrsaError, ValueError):
    """Parameters fall outside the region where a bound is valid."""

    category = "domain_violation"


class NotFound(IrsaError):
    category = "not_found"


class Infeasible(IrsaError):
    """No configuration meets the packet-loss target."""

    category = "infeasible"


class IntegrationFailure(IrsaError):
    category = "integration_failure"


class SurrogateUnavailable(IrsaError):
    category = "surrogate_unavailable"


class DegreeExceedsSlots(IrsaError, ValueError):
    category = "degree_exceeds_slots"
