"""Named random substreams.

Every stochastic mechanism of a run draws from its own generator, derived from
``(base_seed, replication, stream, *extra)``. Switching one mechanism on or off
therefore never shifts the draws seen by another one.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "contacts": 0,
    "transmission": 1,
    "disease": 2,
    "noise": 3,
    "external": 4,
    "symptoms": 5,
    "lfd": 6,
    "pcr": 7,
    "compliance": 8,
    "effects": 9,
    "calibration": 10,
}


def substream(base_seed: int, replication: int, name: str, *extra: int) -> np.random.Generator:
    key = (int(replication), STREAMS[name], *(int(e) for e in extra))
    seq = np.random.SeedSequence(int(base_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))
