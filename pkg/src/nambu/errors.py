"""Exception types shared across the package."""


class NambuError(Exception):
    """Base class for all package errors."""


class DimensionError(NambuError, ValueError):
    pass


class ConvergenceError(NambuError, RuntimeError):
    """Fixed-point iteration did not reach tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class DensityUnderflowError(NambuError, ValueError):
    """A density field dropped below the admissible floor."""


class NodeError(DensityUnderflowError):
    """A wave-function component vanishes, so its phase is undefined."""


class ChartError(NambuError, ValueError):
    """Point lies on the singular set of a local coordinate chart."""


class FieldConstraintError(NambuError, ValueError):
    """Input field violates divergence-free or zero-mean requirements."""


class ConfigError(NambuError, ValueError):
    pass
