"""
Exception hierarchy shared by the CLI and the HTTP routers.

Each error carries the process exit code the CLI returns for it. Routers map
argument-type errors to HTTP 400 and the rest to HTTP 500.
"""

EXIT_OK = 0
EXIT_CONFIGURATION = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4


class MagbendError(Exception):
    """Base class for all errors raised by magbend."""
    exit_code = EXIT_CONFIGURATION


class ConfigurationError(MagbendError):
    """Raised for invalid spec files, grids or settings."""
    pass


class ArgumentError(MagbendError, ValueError):
    """Raised when an operation receives arguments that violate its preconditions."""
    pass


class DomainError(ArgumentError):
    """Raised when a physical quantity lies outside the domain of a formula."""
    pass


class DegenerateFitError(ArgumentError):
    """Raised when a curve cannot determine a fit coefficient."""
    pass


class ExtractionError(MagbendError):
    """Raised when no unambiguous centerline can be read from an image."""
    pass


class ModelStateError(MagbendError):
    """Raised when the surrogate is used before it has been fitted."""
    pass


class TrainingError(MagbendError):
    """Raised when training diverges."""
    pass


class StorageError(MagbendError):
    """Raised when reading or writing a file fails."""
    exit_code = EXIT_IO

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
