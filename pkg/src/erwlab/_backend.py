"""Kernel backend selection.

Hot loops come in two flavours: a numba ``@njit`` version and a vectorised
pure-numpy version.  numba is used whenever it imports, unless the
environment variable ``ERWLAB_DISABLE_NUMBA`` is set to a truthy value.
Both flavours consume every random stream in the same order, so for the
same streams they return the same numbers.
"""

import os

import numpy as np

ENV_FLAG = "ERWLAB_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _flag_set(value):
    return value.strip().lower() not in ("", "0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and not _flag_set(os.environ.get(ENV_FLAG, ""))
DEFAULT_BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """``numba.njit(cache=True, nogil=True)`` or the identity without numba."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def resolve(backend=None):
    if backend is None:
        return DEFAULT_BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


class Blocks:
    """Per-row random draws served from block buffers.

    Row ``r`` reads its own stream ``gens[r]`` (or, with a single generator,
    all rows share it).  A row only advances when it is included in
    :meth:`take`, so with one generator per row the sequence each row sees is
    exactly the sequence of scalar draws a numba kernel would make.
    """

    def __init__(self, gens, rows, kind="random", block=2048):
        self.gens = list(gens)
        self.shared = len(self.gens) == 1 and rows > 1
        if not self.shared and len(self.gens) != rows:
            raise ValueError("need one generator per row or a single shared one")
        self.kind = kind
        self.block = int(block)
        self.buf = np.empty((rows, self.block))
        self.ptr = np.full(rows, self.block, dtype=np.int64)

    def _draw(self, gen, shape):
        if self.kind == "random":
            return gen.random(shape)
        return gen.standard_normal(shape)

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        ptr = self.ptr[rows]
        need = rows[ptr >= self.block]
        if need.size:
            if self.shared:
                self.buf[need] = self._draw(self.gens[0], (need.size, self.block))
            else:
                for r in need:
                    self.buf[r] = self._draw(self.gens[r], self.block)
            self.ptr[need] = 0
            ptr = self.ptr[rows]
        out = self.buf[rows, ptr]
        self.ptr[rows] = ptr + 1
        return out
