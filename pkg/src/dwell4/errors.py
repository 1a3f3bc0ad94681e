"""Exception hierarchy shared by all dwell4 modules."""


class Dwell4Error(Exception):
    """Base class for every error raised by the package."""


class NumericalError(Dwell4Error):
    """A numerical procedure failed or produced an unusable result."""


class ConfigError(Dwell4Error):
    """Invalid user input (parameters, ranges, configuration files)."""


# duffing eigensolver
class DomainTooSmall(NumericalError):
    pass


class NotConverged(NumericalError):
    pass


class ParityViolation(NumericalError):
    pass


class NegativeSplitting(NumericalError):
    pass


# model core
class OutOfBounds(NumericalError):
    """A state sits on or outside |z_l| < [1 + (-1)^l z2] / 2 or |z2| < 1."""


class NegativeSquare(NumericalError):
    pass


class DegeneratePopulation(NumericalError):
    pass


# dynamics
class StepFailure(NumericalError):
    pass


class InsufficientOscillations(NumericalError):
    pass


class NoCrossings(NumericalError):
    pass


# fixed points / regime map
class DegenerateDenominator(NumericalError):
    pass


class NoCriticalPoint(NumericalError):
    pass


class NotAFixedPoint(NumericalError):
    pass


class NoRootInRange(NumericalError):
    pass
