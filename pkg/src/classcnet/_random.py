"""Seeded random streams with deterministic splitting."""
from __future__ import annotations

import numpy as np


def as_generator(source) -> np.random.Generator:
    """Accept a Generator, SeedSequence or integer seed."""
    if isinstance(source, np.random.Generator):
        return source
    if isinstance(source, np.random.SeedSequence):
        return np.random.default_rng(source)
    if source is None:
        raise ValueError("a seed or Generator is required")
    return np.random.default_rng(int(source))


def spawn(source, n: int) -> list[np.random.Generator]:
    """Split ``source`` into ``n`` independent child generators.

    The children depend only on the source state and ``n``, never on how
    the caller schedules work across them.
    """
    if isinstance(source, (int, np.integer)):
        seq = np.random.SeedSequence(int(source))
        return [np.random.default_rng(s) for s in seq.spawn(n)]
    if isinstance(source, np.random.SeedSequence):
        return [np.random.default_rng(s) for s in source.spawn(n)]
    return list(as_generator(source).spawn(n))
