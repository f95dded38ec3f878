"""Deterministic RNG substreams.

Every source of randomness in the package draws from numpy's PCG64,
keyed by the run seed plus a stream tag. Identical (seed, tags) always
produce the identical generator, on any machine, so runs are reproducible
end to end.
"""

import numpy as np

# Stream tags. Keep these stable: changing them changes every seeded run.
STREAM_INIT = 1      # parameter initialization
STREAM_BATCH = 2     # per-epoch shuffling
STREAM_ENCODE = 3    # stochastic input encodings (per epoch, per batch)


def substream(seed, *tags):
    """Generator for the (seed, *tags) substream. Tags must be non-negative ints."""
    entropy = (int(seed) & 0xFFFFFFFFFFFFFFFF,) + tuple(int(t) for t in tags)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
