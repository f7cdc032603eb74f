"""Exception hierarchy shared by all subpackages."""


class AdvRegError(Exception):
    """Base class for every error raised by advreg."""


class DimensionError(AdvRegError, ValueError):
    pass


class ConfigurationError(AdvRegError, ValueError):
    pass


class ContractError(AdvRegError, ValueError):
    pass


class CapabilityError(AdvRegError, NotImplementedError):
    """An operation in the path cannot be differentiated a second time."""


class FormatError(AdvRegError):
    pass


class CorruptionError(AdvRegError):
    pass


class EmptySliceError(AdvRegError):
    pass


class DegenerateError(AdvRegError, ValueError):
    """A distribution or sample has zero spread where a positive one is needed."""


class SingularityError(AdvRegError, ValueError):
    pass


class EmptySampleError(AdvRegError, ValueError):
    pass


class DivergedError(AdvRegError, FloatingPointError):
    pass
