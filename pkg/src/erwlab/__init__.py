"""Simulation and verification laboratory for the elephant random walk.

Modules: ``coeffs`` (a_n, A_n), ``walk`` (paths, zeros, return times),
``exact`` (dynamic-programming tables), ``embedding`` (Brownian embedding),
``limits`` (stable-1/2 subordinator, H, eta, Levy measure), ``stats``
(survival curves, tail fits and normalised statistics), ``cli``.
"""

__version__ = "0.1.0"

from .coeffs import MemoryParam, coeff_a, coeff_A, sequence, t1_constant  # noqa: E402
from .errors import NumericError, RegimeError, ResourceError  # noqa: E402

__all__ = ["MemoryParam", "coeff_a", "coeff_A", "sequence", "t1_constant",
           "NumericError", "RegimeError", "ResourceError", "__version__"]
