"""Seeded random sub-streams.

Every random draw in the package comes from a generator keyed by
``(master_seed, *keys)``. The underlying bit generator is Philox, a
counter-based generator, so streams for different trials or purposes never
overlap and can be created in any order or in parallel.
"""

import numpy as np

# purpose keys for the per-trial sub-streams
DROP = 0
PILOTS = 1
FADING = 2
DARTS = 3
THETA = 4
SELECT = 5


def substream(seed, *keys):
    """Return a Generator for the sub-stream ``(seed, *keys)``.

    ``seed`` may already be a ``numpy.random.Generator``; it is then returned
    unchanged so callers can pass either form.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError("seeds and stream keys must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
