"""Exception hierarchy shared by the mechanism, solver and simulator."""


class MechanismError(Exception):
    """Base class for every error raised by this package."""


class AllNonParticipating(MechanismError):
    """No user holds a positive budget, so proportional payment is undefined."""


class DegenerateOpponents(MechanismError):
    """Best response asked for with a zero rival budget sum."""


class PopulationTooSmall(MechanismError):
    """The second-stage game needs at least two users."""


class EmptyParticipantSet(MechanismError):
    pass


class NoInteriorMaximum(MechanismError):
    """Server utility is decreasing over the whole reward bracket."""


class ZeroSigma(MechanismError):
    pass


class ZeroBudget(MechanismError):
    pass


class DimensionMismatch(MechanismError):
    pass


class EmptyResponseSet(MechanismError):
    pass


class ConfigError(MechanismError):
    """Invalid experiment configuration; the message says which field."""
