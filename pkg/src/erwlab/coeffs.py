"""The martingale factors a_n = Gamma(n)/Gamma(n+2p-1) and their squared sums.

``a`` is computed by the multiplicative recurrence

    a_{n+1} = a_n * n / (n + 2p - 1),    a_1 = 1/Gamma(2p),

which never forms a Gamma quotient directly (Gamma overflows near n = 171).
For p = 0 the convention a_1 = 0 is used and the recurrence is seeded at
a_2 = 1 instead, giving a_n = n - 1.
"""

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import RegimeError

DIFFUSIVE_BOUND = 0.75


@dataclass(frozen=True)
class MemoryParam:
    """Memory parameter ``p``; only the diffusive regime unless ``demo`` is set.

    ``demo=True`` admits 3/4 <= p < 1 for qualitative transience runs of the
    walk simulator.  Asymptotic formulas still refuse such values.
    """

    p: float
    demo: bool = False

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p < 0.0 or p >= 1.0:
            raise RegimeError(f"memory parameter must lie in [0, 1), got {p}")
        if p >= DIFFUSIVE_BOUND and not self.demo:
            raise RegimeError(
                f"p = {p} is not diffusive (p < 3/4 required); "
                "pass demo=True for the qualitative transience demo")
        object.__setattr__(self, "p", p)

    @property
    def diffusive(self) -> bool:
        return self.p < DIFFUSIVE_BOUND

    @property
    def beta(self) -> float:
        """The growth exponent 3 - 4p of A_n."""
        return 3.0 - 4.0 * self.p

    def __float__(self):
        return self.p


def as_param(p) -> MemoryParam:
    return p if isinstance(p, MemoryParam) else MemoryParam(p)


def _require_diffusive(mp):
    if not mp.diffusive:
        raise RegimeError(f"asymptotics need p < 3/4, got {mp.p}")


class CoeffSequence:
    """Memoised, append-only arrays ``a[0..n]`` and ``A[0..n]`` for one p.

    Arrays returned by :meth:`a_upto` / :meth:`A_upto` are read-only views.
    Extension doubles the stored length and is guarded by a lock, so many
    threads may read concurrently.
    """

    def __init__(self, p):
        self.param = as_param(p)
        self._lock = threading.Lock()
        self._a = np.zeros(1)
        self._A = np.zeros(1)
        self._extend(64)

    @property
    def p(self) -> float:
        return self.param.p

    def _extend(self, n):
        p = self.p
        size = max(n + 1, 2 * len(self._a))
        a = np.zeros(size)
        if p > 0.0:
            a[1] = math.exp(-math.lgamma(2.0 * p))
        # seed a_2 = 1 / Gamma(1 + 2p) directly: the first factor 1 / (2p)
        # of the recurrence overflows for tiny p
        a[2] = math.exp(-math.lgamma(1.0 + 2.0 * p))
        j = np.arange(2, size - 1, dtype=float)
        a[3:] = a[2] * np.cumprod(j / (j + (2.0 * p - 1.0)))
        A = np.cumsum(a * a)
        a.flags.writeable = False
        A.flags.writeable = False
        self._a, self._A = a, A

    def _ensure(self, n):
        if n >= len(self._a):
            with self._lock:
                if n >= len(self._a):
                    self._extend(n)

    def a_upto(self, n: int) -> np.ndarray:
        self._ensure(n)
        return self._a[: n + 1]

    def A_upto(self, n: int) -> np.ndarray:
        self._ensure(n)
        return self._A[: n + 1]

    def a(self, n: int) -> float:
        if n < 0:
            raise ValueError("index must be non-negative")
        self._ensure(n)
        return float(self._a[n])

    def A(self, n: int) -> float:
        if n < 0:
            raise ValueError("index must be non-negative")
        self._ensure(n)
        return float(self._A[n])


@lru_cache(maxsize=64)
def _sequence(p: float, demo: bool) -> CoeffSequence:
    return CoeffSequence(MemoryParam(p, demo))


def sequence(p) -> CoeffSequence:
    mp = as_param(p)
    return _sequence(mp.p, mp.demo)


def coeff_a(p, n: int) -> float:
    return sequence(p).a(n)


def coeff_A(p, n: int) -> float:
    return sequence(p).A(n)


def asymptotic_a(p, n) -> float:
    mp = as_param(p)
    _require_diffusive(mp)
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(n) ** (1.0 - 2.0 * mp.p)


def asymptotic_A(p, n) -> float:
    mp = as_param(p)
    _require_diffusive(mp)
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(n) ** mp.beta / mp.beta


def t1_constant(p) -> float:
    """Constant C(p) in P(R > n) ~ C(p) n^(2p - 3/2) for the walk started at 0."""
    mp = as_param(p)
    _require_diffusive(mp)
    if mp.p == 0.0:
        raise RegimeError("p = 0 has R = 2 almost surely; no tail constant")
    return math.exp(-math.lgamma(2.0 * mp.p)) * math.sqrt((6.0 - 8.0 * mp.p) / math.pi)


def increment_ratio(p, k: int, n: int) -> float:
    """(A_{k+n} - A_k) / a_{k+1}^2."""
    seq = sequence(p)
    return (seq.A(k + n) - seq.A(k)) / seq.a(k + 1) ** 2
