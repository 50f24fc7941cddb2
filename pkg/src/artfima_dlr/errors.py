"""Exception hierarchy shared by all modules."""


class ArtfimaDlrError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ArtfimaDlrError, ValueError):
    """An input lies outside the domain of an operation."""


class UnsupportedFamilyError(DomainError):
    """The requested operation does not exist for this error family."""


class EvaluationError(ArtfimaDlrError, ArithmeticError):
    """A numerical evaluation produced a non-finite or invalid value."""


class OptimizationError(ArtfimaDlrError, RuntimeError):
    """Every optimizer start failed."""


class ConfigError(ArtfimaDlrError, ValueError):
    """Invalid run configuration."""


class ParseError(DomainError):
    """Malformed input file."""


class DegenerateChainWarning(UserWarning):
    """A chain column has zero variance; its ESS is reported as 0."""
