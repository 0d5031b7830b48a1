"""Named random sub-streams derived from a single seed."""

import numpy as np

# Stable identifiers; changing them changes every seeded output.
STREAMS = {
    "schedule": 1,
    "init": 2,
    "sampling": 3,
    "train": 4,
    "validation": 5,
    "synth": 6,
    "split": 7,
    "ablation": 8,
    "render": 9,
}


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """
    Return an independent generator for ``name`` (plus optional integer keys).

    The same (seed, name, keys) always yields the same sequence, and
    different names never share state, so components stay reproducible on
    their own.
    """
    if name not in STREAMS:
        raise KeyError(f"Unknown random stream: {name}")
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("Seeds and stream keys must be non-negative")
    return np.random.default_rng([int(seed), STREAMS[name], *(int(k) for k in keys)])
