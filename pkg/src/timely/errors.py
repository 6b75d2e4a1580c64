"""Exception hierarchy shared by every module of the toolkit."""


class TimelyError(Exception):
    """Base class for all toolkit errors."""


class DomainError(TimelyError, ValueError):
    """A state lies outside the phase-space domain of a system or field."""


class ConfigError(TimelyError, ValueError):
    """Invalid integrator or scenario configuration."""


class NoCrossing(TimelyError):
    """The flow reached its horizon or escaped before meeting a section."""


class TangentialCrossing(TimelyError):
    """A section was crossed with transversality below threshold."""


class StationaryPoint(TimelyError, ValueError):
    """The Hamiltonian vector field vanishes at the requested point."""


class ValidationFailed(TimelyError):
    """No neighbourhood radius could be validated for a local clock."""


class OutsideBall(DomainError):
    """A state lies outside the validated ball of a local clock."""


class PreconditionUnverified(TimelyError):
    """A caller-facing precondition (e.g. local timeliness) did not hold."""


class BaseMismatch(TimelyError, ValueError):
    """Tangent vectors attached to different projective points."""


class DimensionMismatch(TimelyError, ValueError):
    """Matrix, vector or system dimensions do not agree."""


class KindMismatch(TimelyError, ValueError):
    """An observable of the wrong kind (expectation vs Weinberg) was supplied."""


class ParseError(TimelyError, ValueError):
    """Malformed expression or scenario document.

    Carries the character offset (or JSON path) at which parsing failed.
    """

    def __init__(self, message, position=None):
        self.message = message
        self.position = position
        where = f" at {position}" if position is not None else ""
        super().__init__(f"{message}{where}")
