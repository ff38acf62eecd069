"""Named random sub-streams derived from one root seed"""
import numpy as np

STREAMS = {
    "sampling": 0,
    "assignment": 1,
    "synth": 2,
    "folds": 3,
    "posterior": 4,
}


def substream(seed, name, *keys):
    """Return a generator for stream `name`, further keyed by integers

    The same (seed, name, keys) always yields the same sequence, whichever
    process asks for it.
    """
    return np.random.default_rng([int(seed), STREAMS[name], *[int(key) for key in keys]])
