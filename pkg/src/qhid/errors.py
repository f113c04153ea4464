"""Exception hierarchy shared by the identification pipeline."""


class QHIDError(Exception):
    """Base class for all package errors."""


class DimensionError(QHIDError, ValueError):
    """Operands act on different numbers of qubits."""


class CapacityError(QHIDError, ValueError):
    """Requested dense object is too large to build."""


class ConfigurationError(QHIDError, ValueError):
    """A model or run configuration is incomplete or inconsistent."""


class ValidationError(QHIDError, ValueError):
    """Input data violates a documented precondition."""


class NyquistError(QHIDError, ValueError):
    """Sampling interval too coarse for the dynamics being identified."""


class IdentificationError(QHIDError, RuntimeError):
    """Realization or parameter matching failed.

    ``best`` carries the best candidate found, when there is one.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
