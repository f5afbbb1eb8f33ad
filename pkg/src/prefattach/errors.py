"""Exceptions shared across modules."""


class ResourceBudgetError(RuntimeError):
    """A configured enumeration, search or summation budget was exceeded."""
