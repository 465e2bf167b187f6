"""Exception types shared across the package.

Every malformed input maps to a distinct error class so callers (and the
HTTP layer) can tell format problems apart from data problems.
"""


class PartmapError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(PartmapError):
    """File does not follow the expected container format (magic, version)."""


class CorruptionError(PartmapError):
    """File follows the format but its payload is incomplete or inconsistent."""


class DataError(PartmapError):
    """Payload decodes but contains invalid values (NaN/Inf)."""


class ShapeError(PartmapError):
    """Operands have incompatible dimensions."""


class ValidationError(PartmapError):
    """A loaded or constructed object violates its invariants."""


class InsufficientDataError(PartmapError):
    """Not enough (distinct) samples to run an estimation procedure."""


class ParameterError(PartmapError):
    """A caller-supplied parameter is outside its valid range."""
