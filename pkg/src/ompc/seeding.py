"""Per-trial seeds derived from a base seed, independent of execution order."""

import numpy as np


def trial_seed(base: int, trial: int) -> int:
    """32-bit seed for trial ``trial``: SeedSequence(base, spawn_key=(trial,)) hashed down."""
    return int(np.random.SeedSequence(int(base), spawn_key=(int(trial),)).generate_state(1, dtype=np.uint32)[0])
