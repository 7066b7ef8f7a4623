"""Exception hierarchy shared by all qreuse modules."""


class QReuseError(Exception):
    """Base class for every error raised by qreuse."""


class DomainError(QReuseError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DimensionError(QReuseError, ValueError):
    """Operator, state, or register dimensions do not line up."""


class CapacityError(QReuseError):
    """A composed state would exceed the configured maximum dimension."""


class NonUnitaryError(QReuseError, ValueError):
    """An operator was applied in strict mode but is not unitary."""


class InvalidStateError(QReuseError, ValueError):
    """Amplitudes are not finite or not normalized."""


class PreconditionError(QReuseError):
    """A state handed to a protocol step does not have the expected form."""


class DatasetError(QReuseError, ValueError):
    """A dataset file or in-memory dataset is malformed."""
