class RegimeError(ValueError):
    """Memory parameter outside the diffusive range [0, 3/4)."""


class ResourceError(RuntimeError):
    """A horizon, iteration budget or memory budget would be exceeded."""


class NumericError(ArithmeticError):
    """A sampler produced a non-finite value."""
