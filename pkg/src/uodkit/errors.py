"""Exception hierarchy shared by all pipeline stages."""


class UodkitError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(UodkitError):
    """A record or intermediate value breaks a declared invariant.

    Carries the name of the offending field so callers can report it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ArchiveError(UodkitError):
    """Base class for archive read failures."""


class BadMagicError(ArchiveError):
    pass


class VersionMismatchError(ArchiveError):
    pass


class TruncatedArchiveError(ArchiveError):
    pass


class DegenerateInputError(UodkitError):
    """Input is structurally valid but numerically unusable
    (zero vectors, fewer distinct points than clusters, ...)."""


class SolverConvergenceError(UodkitError):
    """Eigensolver failed to reach the requested residual."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class PipelineError(UodkitError):
    """A dataset-level stage produced an unusable model or result."""


class SchemaError(UodkitError):
    """A JSON document does not match the expected schema.

    ``path`` locates the violation, e.g. ``annotations[3].bbox``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
