"""Exception types shared across the package."""


class HydrodynError(Exception):
    """Base class for all package errors."""


class DomainError(HydrodynError, ValueError):
    """An input lies outside the domain of a model (non-finite, out of stroke, ...)."""


class ContractError(HydrodynError, ValueError):
    """A caller violated a precondition (shapes, lengths, step sizes)."""


class ConfigError(HydrodynError, ValueError):
    """A configuration or profile is invalid."""


class SchemaError(HydrodynError, ValueError):
    """A file does not follow its declared layout."""


class InsufficientExcitation(HydrodynError, RuntimeError):
    """The regression matrix is rank deficient."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "insufficient excitation: deficient column(s) " + ", ".join(self.columns)
        )


class DivergedError(HydrodynError, RuntimeError):
    """Training or simulation blew up."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        super().__init__(message)
