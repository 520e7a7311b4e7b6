"""Exception hierarchy shared across the package."""


class IgspError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(IgspError, ValueError):
    pass


class PreconditionError(IgspError, ValueError):
    """A standing assumption of an operation is violated by its input."""


class UnsupportedFamilyError(PreconditionError):
    pass


class InternalError(IgspError, RuntimeError):
    """An internal invariant was broken; indicates a bug or a caller contract violation."""


class NotEnoughSamplesError(IgspError, ValueError):
    pass


class DegenerateDataError(IgspError, ValueError):
    pass


class DegreeCapExceeded(IgspError):
    pass
