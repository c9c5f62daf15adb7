class QCLBMError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(QCLBMError, ValueError):
    pass


class GeometryError(ConfigurationError):
    pass


class DegenerateStateError(QCLBMError, ValueError):
    """Raised when a node has non-positive density."""


class DivergenceError(QCLBMError, FloatingPointError):
    def __init__(self, step, message="non-finite values in state"):
        self.step = step
        super().__init__(f"{message} at step {step}")


class SizeCapError(QCLBMError, MemoryError):
    pass
