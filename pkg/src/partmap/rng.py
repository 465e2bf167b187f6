"""Deterministic random-number plumbing.

The package-wide PRNG is numpy's PCG64 (a named 64-bit generator). Every
randomized operation takes an integer seed; independent substreams (per
class, per sample batch, per trial) are derived with ``SeedSequence`` spawn
keys, so parallel work can split seeds without coordination:

    generator(seed)            -> root stream
    generator(seed, 3)         -> substream for key (3,)
    generator(seed, 3, 7)      -> substream for key (3, 7)

Identical (seed, key) pairs always yield identical streams on one platform;
cross-language bit identity is not promised, only the distribution.
"""

import numpy as np


def generator(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and an optional substream key."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(seq))


def class_seed(seed: int, *key: int) -> int:
    """Integer child seed for APIs that take a plain seed, same spawn scheme."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return int(seq.generate_state(1)[0])
