"""Exception hierarchy shared by all airgapfe modules."""


class AirgapFeError(Exception):
    """Base class for all errors raised by airgapfe."""


class InvalidGeometryError(AirgapFeError):
    """Degenerate or inconsistent geometric input (radii, gap ratio, ...)."""


class InvalidSpecError(AirgapFeError):
    """Malformed generator specification (overlapping sectors, bad bands)."""


class MeshFormatError(AirgapFeError):
    """Mesh file cannot be parsed or fails validation; carries a line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedGridError(AirgapFeError):
    """Interface ring is not equidistant; non-equispaced transforms unsupported."""


class ConfigurationError(AirgapFeError):
    """Inconsistent run configuration (missing materials, bad harmonic set, ...)."""


class SolverError(AirgapFeError):
    """Iterative solver breakdown or non-convergence."""


class DomainError(AirgapFeError):
    """Evaluation point outside the valid domain (e.g. radius outside the gap)."""


class InternalError(AirgapFeError):
    """Dimension or index mismatch that indicates a programming error."""
