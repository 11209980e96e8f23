class MomaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(MomaError, ValueError):
    pass


class ContractError(MomaError, ValueError):
    """Raised when an operation is called with arguments that break its preconditions."""


class GeometryError(MomaError, ValueError):
    pass


class EmptyShapeError(MomaError, ValueError):
    """The genome has no active element, so no geometric size is defined."""
