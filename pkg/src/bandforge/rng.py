"""Seeded substreams.

A seed is either an int or a sequence of ints ``(entropy, k1, k2, ...)``. Extra
keys passed to :func:`substream` are appended to the spawn key, so the stream
for replicate ``b`` depends only on ``(seed, b)`` and never on how many other
streams were created before it or on which thread consumes it.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np


# stream tags
DATA = 0
BOOT = 1
BOOT2 = 2
SMOOTHED = 3


def _split(seed) -> tuple[int, tuple[int, ...]]:
    if isinstance(seed, (int, np.integer)):
        return int(seed), ()
    seed = tuple(int(s) for s in seed)
    if not seed:
        raise ValueError("empty seed sequence")
    return seed[0], seed[1:]


def child_seed(seed, *keys: int) -> tuple[int, ...]:
    """Seed key for a sub-computation, usable wherever a seed is accepted."""
    entropy, base = _split(seed)
    return (entropy, *base, *(int(k) for k in keys))


def substream(seed, *keys: int) -> np.random.Generator:
    entropy, base = _split(seed)
    ss = np.random.SeedSequence(entropy=entropy, spawn_key=base + tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def fresh_seed() -> int:
    """A random 63-bit seed, for runs where the caller gave none."""
    return int(np.random.SeedSequence().generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> 1)
