"""Deterministic random-number streams.

Every parameter draw ``i`` of a run owns a generator derived from
``(master_seed, i)``, so the output does not depend on evaluation order,
batching or thread count.
"""

import numpy as np


def stream(master_seed, *key):
    """Return an independent generator for the spawn key ``key`` under ``master_seed``."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def draw_streams(master_seed, indices, purpose=0):
    """Generators for a list of draw indices.

    ``purpose`` separates families of streams (draws, pilots, MCMC uniforms)
    that share one master seed.
    """
    return [stream(master_seed, purpose, i) for i in indices]
