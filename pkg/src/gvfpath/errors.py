"""Exception types raised across the package."""


class GvfError(Exception):
    """Base class for all package errors."""


class DomainError(GvfError, ValueError):
    """An argument lies outside the domain of a function (e.g. non-finite w)."""


class ParameterError(GvfError, ValueError):
    """A construction parameter is invalid (gain <= 0, L outside (0, 1], ...)."""


class CatalogError(GvfError, KeyError):
    """Unknown catalog entry."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class ShapeError(GvfError, ValueError):
    """Array dimensions do not agree."""


class ValidationError(GvfError, ValueError):
    """User-supplied derivatives disagree with finite differences."""


class SingularityError(GvfError, ArithmeticError):
    """Normalization attempted where the field (or its planar part) vanishes."""


class ExcludedSetError(SingularityError):
    """State lies in the set excluded by the unicycle guidance law."""


class InsufficientDataError(GvfError, ValueError):
    """Too few usable samples for a fit."""
