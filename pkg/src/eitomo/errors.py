"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions are inconsistent with the geometry or each other."""


class DomainError(ValueError):
    """Input values lie outside the domain an operation accepts."""


class ResourceError(MemoryError):
    """A requested allocation exceeds the configured memory budget."""


class NumericError(ArithmeticError):
    """A computation produced non-finite intermediates."""
