"""Exception and warning types shared across the package."""


class CollapseError(Exception):
    """Base class for all package errors."""


class InvalidStateError(CollapseError, ValueError):
    """Amplitudes are non-finite or otherwise unusable."""


class DegenerateStateError(CollapseError, ValueError):
    """State has zero (or underflowing) norm."""


class DegenerateCollapseError(DegenerateStateError):
    """A jump annihilated the state's support."""


class IncompatibleGridError(CollapseError, ValueError):
    """Two objects were defined on different grids."""


class ConditioningError(CollapseError, ValueError):
    """Boundary condition has zero probability."""


class RecordFormatError(CollapseError, ValueError):
    """Malformed collapse-record text.

    ``lineno`` is the 1-based line where parsing failed, when known.
    """

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class RecordOrderingError(RecordFormatError):
    pass


class RecordVersionError(RecordFormatError):
    pass


class ConfigError(CollapseError, ValueError):
    """Bad configuration value. ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class BoundaryLeakWarning(UserWarning):
    """Probability mass reached the periodic wrap seam of the grid."""


class DepletedSupportWarning(UserWarning):
    """A replayed collapse centre fell where the state has almost no mass."""
