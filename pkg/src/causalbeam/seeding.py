"""Named deterministic random streams derived from one global seed.

Every source of randomness in the pipeline (scene geometry, sweep noise,
dataset splits, weight init, epoch shuffling, Shapley permutations,
evaluation noise, random subsets) draws from its own named child stream of
a single 64-bit seed, so any stage can be re-run in isolation and results
do not depend on execution order or worker count.
"""

import numpy as np

STREAMS = {
    "scene": 0,
    "noise": 1,
    "split": 2,
    "init": 3,
    "shuffle": 4,
    "shapley": 5,
    "eval": 6,
    "select": 7,
}


def stream_seed(seed, name, index=0):
    """Stable child SeedSequence for a named stream (index = per-item stream)."""
    if name not in STREAMS:
        raise ValueError(f"unknown stream {name!r}; expected one of {sorted(STREAMS)}")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[name], int(index)))


def stream_rng(seed, name, index=0):
    """Generator seeded from the named child stream."""
    return np.random.default_rng(stream_seed(seed, name, index))
