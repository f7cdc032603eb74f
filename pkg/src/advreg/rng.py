"""Seeded random streams, one independent substream per purpose.

All streams are PCG64 generators derived from a ``SeedSequence`` whose spawn
key is ``(purpose code, *extra)``.  Normal variates come from numpy's
ziggurat sampler.
"""

import numpy as np

PURPOSES = {
    "data": 1,
    "oracle": 2,
    "init": 3,
    "batches": 4,
    "conditions": 5,
    "noise": 6,
    "eval": 7,
    "penalty": 8,
    "pairing": 9,
    "sweep": 10,
    "ensemble": 11,
}


def substream(seed: int, purpose: str, *extra: int) -> np.random.Generator:
    key = (PURPOSES[purpose],) + tuple(int(e) for e in extra)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def derive_seed(seed: int, *extra: int) -> int:
    """A child seed for sweep points and repetitions."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(PURPOSES["sweep"],) + tuple(int(e) for e in extra))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
