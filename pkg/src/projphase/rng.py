"""Seeded, splittable random streams.

Every stochastic routine takes a ``numpy.random.Generator``. Sweeps derive
per-trial generators from ``(master_seed, *keys)`` so that results do not
depend on scheduling order.
"""

import numpy as np


def substream(seed, *keys):
    """Return a generator for the substream ``keys`` of ``seed``.

    >>> a = substream(7, 3, 5, 0).standard_normal()
    >>> b = substream(7, 3, 5, 0).standard_normal()
    >>> a == b
    True
    """
    if seed is None:
        seed = 0
    return np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    )


def as_generator(rng):
    """Accept a Generator, an int seed or None and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return substream(0 if rng is None else rng)
