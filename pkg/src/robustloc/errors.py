"""Exception types shared across the package."""


class RobustlocError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(RobustlocError, ValueError):
    """Dimension or shape mismatch between inputs."""


class ConfigError(RobustlocError, ValueError):
    """Invalid configuration value or combination."""


class NumericalError(RobustlocError, RuntimeError):
    """Non-finite values, failed factorizations, or diverging iterations."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its cap without meeting tolerance."""
