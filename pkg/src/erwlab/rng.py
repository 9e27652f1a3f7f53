"""Counter-based random streams.

Replicate ``r`` of a campaign with master seed ``seed`` always draws from the
Philox stream keyed by ``(seed, r)``, whatever the thread count or chunking.
"""

from collections.abc import Sequence

import numpy as np

MAX_SEED = 2**64 - 1


def stream(seed: int, replicate: int) -> np.random.Generator:
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if replicate < 0:
        raise ValueError("replicate index must be non-negative")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replicate,))
    return np.random.Generator(np.random.Philox(ss))


def streams(seed: int, start: int, stop: int) -> list[np.random.Generator]:
    return [stream(seed, r) for r in range(start, stop)]


def as_generator(rng=None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.Generator(np.random.Philox(rng))
    raise TypeError(f"cannot make a Generator from {type(rng).__name__}")


def as_streams(rng, replicates: int) -> list[np.random.Generator]:
    """Normalise ``rng`` to a list of generators for a batch of replicates.

    A single generator (or seed) means all replicates share one stream; a
    sequence must hold exactly one generator per replicate.
    """
    if isinstance(rng, Sequence) and not isinstance(rng, (str, bytes)):
        gens = list(rng)
        if len(gens) != replicates:
            raise ValueError(
                f"got {len(gens)} streams for {replicates} replicates")
        return gens
    return [as_generator(rng)]
