"""Child-seed derivation from a single master seed.

Every stochastic operation draws from ``child_rng(master, stream, *index)``.
The seed material is hashed through numpy's ``SeedSequence``, so tree ``i``
of a forest always sees the same stream no matter how many trees are fit or
in which order they finish.
"""

import numpy as np

STREAM_SYNTH = 0x5EED_0001
STREAM_SPLIT = 0x5EED_0002
STREAM_CV = 0x5EED_0003
STREAM_FOREST = 0x5EED_0004
STREAM_TREE = 0x5EED_0005

_MASK64 = (1 << 64) - 1


def child_seed_sequence(master, stream, *index):
    if master < 0:
        raise ValueError("seed must be an unsigned integer")
    return np.random.SeedSequence([int(master) & _MASK64, stream, *map(int, index)])


def child_rng(master, stream, *index):
    return np.random.default_rng(child_seed_sequence(master, stream, *index))
