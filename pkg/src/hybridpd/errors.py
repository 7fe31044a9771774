"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid combination of model/data/scheme settings."""


class ShapeError(ConfigurationError):
    """Dimension mismatch between a model and the data handed to it."""


class DivergenceError(RuntimeError):
    """Training or integration produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
