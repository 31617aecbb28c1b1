"""Exception types raised by the recovery pipeline."""


class ConfigError(ValueError):
    """Invalid user-supplied configuration or preconditions."""


class DegenerateError(ArithmeticError):
    """A numerical degeneracy that makes the requested estimate meaningless.

    Raised for coincident roots, poles sitting on evaluation nodes, dead
    kernel-spectrum bins and singular normal equations.
    """


class TruncationError(ConfigError):
    """The filtered pulses do not fit inside the observation window."""


class NotFittedError(ValueError, AttributeError):
    """Estimator used before ``fit``."""
