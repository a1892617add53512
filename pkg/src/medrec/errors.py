"""Exception types shared across the package."""


class MedrecError(Exception):
    """Base class for all package errors."""


class ShapeError(MedrecError):
    """Tensor or matrix dimensions do not chain."""


class IngestionError(MedrecError):
    """Malformed input file; message names the offending row."""


class SamplingError(MedrecError):
    """Requested sample cannot be drawn from the available population."""


class DivergenceError(MedrecError):
    """Training produced a non-finite loss or gradient."""


class ConfigError(MedrecError):
    """Invalid configuration value."""


class DisconnectedQueryError(MedrecError):
    """Query drugs fall into several components of the interaction graph."""

    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        super().__init__(
            "query drugs are not connected; components: "
            + "; ".join(str(c) for c in self.components)
        )
