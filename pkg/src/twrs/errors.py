"""Exception types raised by the precoding library."""


class TwrsError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(TwrsError, ValueError):
    pass


class NotHermitian(TwrsError, ValueError):
    pass


class RankNotOne(TwrsError, ValueError):
    pass


class SingularNoise(TwrsError, ValueError):
    pass


class Infeasible(TwrsError):
    """The design problem has no point meeting the SINR and power constraints."""


class NumericalFailure(TwrsError):
    """The conic backend or a decomposition step broke down."""


class NoNullDirection(NumericalFailure):
    pass


class PreconditionViolated(TwrsError):
    pass


class DegenerateDenominator(TwrsError, ZeroDivisionError):
    pass
