from __future__ import annotations

import numpy as np

from .errors import ParameterError


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")
    if seed < 0:
        raise ParameterError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(int(seed))


def child_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Seed for trial `index` of a run seeded with `seed`.

    The splitting rule is SeedSequence([seed, index]), so a trial can be
    regenerated on its own without replaying the trials before it.
    """
    if seed < 0 or index < 0:
        raise ParameterError("seed and trial index must be non-negative")
    return np.random.SeedSequence([int(seed), int(index)])
