"""Seeded counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
tuple (seed, stream, ...), so replicates and workers never share state and
results do not depend on scheduling order.
"""

from __future__ import annotations

import numpy as np

NOISE_STREAM = 1
PRIOR_STREAM = 2
CHAIN_STREAM = 3
REMAINDER_STREAM = 4
REPLICATE_STREAM = 5


def make_rng(*keys: int) -> np.random.Generator:
    """Philox generator for the key tuple; keys must be nonnegative."""
    if any(k < 0 for k in keys):
        raise ValueError(f"random stream keys must be nonnegative, got {keys}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(keys))))


def replicate_seed(seed: int, replicate: int, stream: int = REPLICATE_STREAM) -> int:
    """Derived 32-bit seed for replicate ``replicate`` of a seeded study."""
    return int(np.random.SeedSequence([seed, stream, replicate]).generate_state(1)[0])
