"""Reproducible noise streams.

Every noise role (initial state, process noise, observation noise, channel
noise) gets its own counter-based Philox stream derived from (seed, role), so
draws are bit-identical no matter how the surrounding computation is batched
or parallelised.
"""

import numpy as np

ROLE_INIT = 0
ROLE_PROCESS = 1
ROLE_OBSERVATION = 2
ROLE_CHANNEL = 3


def stream(seed: int, role: int) -> np.random.Generator:
    """Generator for one (seed, role) pair; same pair -> same stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(role),))
    return np.random.Generator(np.random.Philox(ss))


def normals(seed: int, role: int, shape) -> np.ndarray:
    """Standard-normal block for a role, drawn in one deterministic call."""
    return stream(seed, role).standard_normal(shape)
