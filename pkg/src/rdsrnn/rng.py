"""Seeded random streams.

All Monte-Carlo routines derive per-trajectory generators from a 64-bit
master seed through numpy ``SeedSequence`` spawn keys, so trajectory ``n`` of
a batch is reproducible independently of the batch size. Gaussian variates
come from ``Generator.standard_normal`` (ziggurat); the choice is fixed
because seeded runs are compared exactly in tests.
"""

import numpy as np


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Return the generator for stream ``index`` under master ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))
