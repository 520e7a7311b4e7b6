"""Seeded random streams.

All randomness goes through Philox (a counter-based generator) keyed by a
``SeedSequence`` built from the user seed plus a stream path, so that e.g.
block 3 of replicate 7 always sees the same numbers regardless of what other
streams were consumed before it.
"""

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    if seed < 0 or any(s < 0 for s in stream):
        raise ValueError("seeds and stream indices must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))
