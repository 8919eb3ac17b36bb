"""Exception hierarchy shared across the package."""


class LinDistError(Exception):
    """Base class for all package errors."""


class FeederParseError(LinDistError, ValueError):
    """Malformed feeder file. Carries the 1-based line number and field."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class FeederValidationError(LinDistError, ValueError):
    """Feeder parsed but violates a model invariant."""


class PartitionError(LinDistError):
    """Rows of the LP could not be attributed to exactly one subsystem."""


class InfeasibleSubsystemError(LinDistError):
    """A subsystem's equality system is inconsistent."""

    def __init__(self, message, subsystem=None):
        self.subsystem = subsystem
        super().__init__(message)


class RankDeficiencyError(LinDistError, ValueError):
    """A_s A_s^T is not positive definite; run row_rank_reduce first."""


class OrphanVariableError(LinDistError):
    """A global variable is owned by no subsystem."""


class OracleSizeError(LinDistError):
    """Instance too large for the reference solver."""
