"""Labeled random-stream derivation.

Every random stream in a run is derived from one master seed plus a tuple of
integer keys, so streams never share state and toggling one mechanism (e.g.
random events) does not shift the draws of another.
"""

import numpy as np

# fixed labels for the per-run sub-streams
GRAPH = 0
OPINIONS = 1
STUBBORNNESS = 2
CATEGORIES = 3
EVENTS = 4
INJECTION = 5


def derive_seed(seed, *keys):
    """Return a 64-bit integer seed derived from ``seed`` and integer ``keys``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def stream(seed, *keys):
    """Return an independent ``numpy.random.Generator`` for ``(seed, *keys)``."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    )
