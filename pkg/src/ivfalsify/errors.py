"""Semantic exception hierarchy for the toolkit."""


class FalsifyError(Exception):
    """Base class for all package errors."""


class TableError(FalsifyError, ValueError):
    """A probability table violates its construction contract."""


class DomainMismatchError(TableError):
    """Two tables were combined that do not share domains / strata."""


class DegenerateDistributionError(TableError):
    """A distribution carries no usable mass (e.g. no observable stratum)."""


class UndefinedStrataError(FalsifyError, ValueError):
    """An operation needs strata that the table does not define."""


class OracleSizeError(FalsifyError, ValueError):
    """The response-type enumeration would exceed the exact-oracle limit."""


class NotAnInstrumentError(FalsifyError, ValueError):
    """Cov(Z, X) vanishes, so the instrumental-variable ratio is undefined."""


class InconsistentModelError(FalsifyError, ValueError):
    """A covariance admits no linear instrumental model with positive noise."""


class InversionError(FalsifyError, ValueError):
    """A generator has no usable one-to-one inverse for the request."""
