"""Reproducible RNG streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``. Streams
are Philox (counter-based) generators derived from one 64-bit seed through
``SeedSequence`` so independent tasks never share state.
"""
from __future__ import annotations

from typing import List, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def make_stream(seed: SeedLike) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


def spawn_streams(seed: SeedLike, count: int) -> List[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(count)]


def named_streams(seed: int, *names: str) -> dict:
    """One stream per name; a name always maps to the same child sequence."""
    return dict(zip(names, spawn_streams(seed, len(names))))
