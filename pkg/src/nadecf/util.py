"""Small shared helpers."""

import numpy as np


def new_rng(seed):
    """Return a PCG64-backed Generator.

    Every random draw in the toolkit flows through a generator built here,
    so a seed pins results across runs and platforms (for a fixed NumPy
    version). ``seed`` may be an int or a ``numpy.random.SeedSequence``.
    """
    return np.random.Generator(np.random.PCG64(seed))
