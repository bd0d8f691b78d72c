"""Exception hierarchy. Everything subclasses ValueError so callers that only
know about ValueError keep working."""


class RockafellianError(ValueError):
    pass


class DistributionError(RockafellianError):
    pass


class IndeterminateFormError(RockafellianError):
    """(+inf) + (-inf), or a NaN produced by an objective."""


class UnsupportedCombinationError(RockafellianError):
    pass


class EmptySetError(RockafellianError):
    pass


class LPCapExceededError(RockafellianError):
    pass


class LPFailureError(RockafellianError):
    pass


class InsufficientDataError(RockafellianError):
    pass


class ConfigError(RockafellianError):
    pass


class UnknownClaimError(RockafellianError):
    pass


class InvalidInputError(RockafellianError):
    """A parameter outside its documented range."""
