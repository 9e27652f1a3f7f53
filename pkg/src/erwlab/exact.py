"""Exact forward propagation of the chain (n, S(n)) under P_k."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .coeffs import as_param
from .errors import ResourceError

MAX_HORIZON = 2**14
# full occupancy tables grow as N^2 / 2 doubles; above this only the
# survival and zero-probability columns are kept
MASS_HORIZON = 4096


@dataclass(frozen=True, eq=False)
class ExactTable:
    """State probabilities of the walk started at 0 at even time ``start_time``.

    Row m holds the reachable positions -m, -m+2, ..., m in that order
    (parity compressed).  ``survival[m]`` is the total mass left at step m,
    which is P_k(R > m) for a table killed at zero and 1 otherwise.
    ``p_zero[m]`` is the mass that arrived at 0 at step m (before killing).
    """

    p: float
    start_time: int
    horizon: int
    killed_at_zero: bool
    survival: np.ndarray
    p_zero: np.ndarray
    _flat: np.ndarray

    @property
    def has_mass(self) -> bool:
        return self._flat.size > 0

    def row(self, m: int) -> np.ndarray:
        """Masses of positions -m, -m+2, ..., m at step m."""
        if not self.has_mass:
            raise ResourceError(
                f"occupancy rows are kept only for horizons <= {MASS_HORIZON}")
        if not 0 <= m <= self.horizon:
            raise IndexError(m)
        off = m * (m + 1) // 2
        return self._flat[off:off + m + 1]

    def mass(self, m: int, s: int) -> float:
        if abs(s) > m or (m - s) % 2:
            return 0.0
        if s == 0 and m > 0 and self.killed_at_zero:
            return 0.0
        return float(self.row(m)[(s + m) // 2])

    def expected_zeros(self, n: int) -> float:
        """E Z(n) = sum of P(S(k+j) = 0) for 1 <= j <= n (unkilled table)."""
        if self.killed_at_zero:
            raise ValueError("expected zero counts need an unkilled table")
        return float(np.sum(self.p_zero[1:n + 1]))

    def truncated_mean_return(self, n: int | None = None) -> float:
        """E[R ^ N] = sum of P(R > m) for 0 <= m < N (killed table)."""
        if not self.killed_at_zero:
            raise ValueError("return-time moments need a killed table")
        n = self.horizon if n is None else n
        return float(np.sum(self.survival[:n]))


def exact_table(p, start_time: int, horizon: int, killed_at_zero: bool,
                keep_mass: bool | None = None, *, backend=None) -> ExactTable:
    mp = as_param(p)
    if start_time < 0 or start_time % 2:
        raise ValueError(f"start time must be an even non-negative integer, got {start_time}")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if horizon > MAX_HORIZON:
        raise ResourceError(f"horizon {horizon} exceeds the DP budget {MAX_HORIZON}")
    if keep_mass is None:
        keep_mass = horizon <= MASS_HORIZON
    elif keep_mass and horizon > MASS_HORIZON:
        raise ResourceError(f"full mass tables are limited to horizon {MASS_HORIZON}")
    fn = kernels.exact_dp_nb if kernels.resolve(backend) == "numba" else kernels.exact_dp_np
    survival, p_zero, flat = fn(mp.p, int(start_time), int(horizon),
                                bool(killed_at_zero), bool(keep_mass))
    for arr in (survival, p_zero, flat):
        arr.flags.writeable = False
    return ExactTable(mp.p, int(start_time), int(horizon), bool(killed_at_zero),
                      survival, p_zero, flat)
