"""Exception types shared across the toolkit."""


class SphereLabError(ValueError):
    """Base class for every error raised by spherelab."""


class InvalidSpec(SphereLabError):
    pass


class CapExceeded(SphereLabError):
    """A predicted output size is larger than the configured cap."""


class BudgetExceeded(SphereLabError):
    """A predicted amount of work is larger than the configured budget."""


class DimensionTooSmall(SphereLabError):
    pass


class EmptySequence(SphereLabError):
    pass


class InvalidExponent(SphereLabError):
    pass


class InvalidParams(SphereLabError):
    pass


class NotPrime(SphereLabError):
    pass


class InsufficientData(SphereLabError):
    pass


class InvalidDimensionValue(SphereLabError):
    pass


class ParseError(SphereLabError):
    pass


class InvalidConfig(SphereLabError):
    pass
