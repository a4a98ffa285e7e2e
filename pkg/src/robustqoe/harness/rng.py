"""Counter-based random streams.

Each replication draws from its own Philox stream keyed by
``(seed, replication, purpose)``, so results do not depend on the order or
the thread in which replications run.
"""

from __future__ import annotations

import enum

import numpy as np

__all__ = ["Purpose", "stream"]


class Purpose(enum.IntEnum):
    DATA = 0
    CONTAMINATION = 1
    PILOT = 2
    SHUFFLE = 3
    INSTANCE = 4
    TAIL_PILOT = 5


def stream(seed: int, rep: int, purpose: Purpose | int = Purpose.DATA) -> np.random.Generator:
    if seed < 0 or rep < 0:
        raise ValueError("seed and replication index must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(rep), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))
