"""Shared exception types."""


class InvalidInputError(ValueError):
    """Operation received data violating its preconditions."""


class InvalidConfigError(ValueError):
    """Configuration object is internally inconsistent or unusable."""


class EnumerationBudgetError(RuntimeError):
    """Exact enumeration would exceed the configured state budget."""
