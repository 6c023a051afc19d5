"""Exception hierarchy shared by all modules."""


class PseudospecError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(PseudospecError, ValueError):
    pass


class NumericalFailure(PseudospecError, ArithmeticError):
    """Raised when a quadrature or iterative scheme cannot meet its tolerance.

    ``diagnostics`` carries whatever the failing routine knew at the time
    (estimated error, refinement level, offending frequency, ...).
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class DegenerateFitError(PseudospecError):
    pass


class InvalidBandwidthError(PseudospecError, ValueError):
    def __init__(self, message, node=None, bandwidth=None):
        super().__init__(message)
        self.node = node
        self.bandwidth = bandwidth


class SingularSmootherError(PseudospecError, ArithmeticError):
    def __init__(self, message, node=None, bandwidth=None):
        super().__init__(message)
        self.node = node
        self.bandwidth = bandwidth


class SelectionFailure(PseudospecError):
    pass


class UnsupportedDimensionError(PseudospecError, ValueError):
    pass


class SingularSpectrumError(PseudospecError, ArithmeticError):
    pass


class InvalidIntensityError(PseudospecError, ValueError):
    pass


class UnsupportedOperationError(PseudospecError):
    pass


class ConfigError(PseudospecError, ValueError):
    pass
