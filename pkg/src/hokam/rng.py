"""
Seeded random streams. A stream is addressed by (seed_root, tag, keys...), so
Monte-Carlo sample i, g-series family K, restart (k, r) or sweep point idx
draws the same numbers on any backend and in any evaluation order.
"""

from __future__ import annotations
from dataclasses import dataclass
from enum import IntEnum
import numpy as np

_MASK = 0xFFFFFFFF


class Stream(IntEnum):
    SAMPLE = 0x5A3F1E  # divisor / nondegeneracy samples
    FAMILY = 0xFA3117  # g-series coefficients
    RESTART = 0x7E57A7  # variational multistart
    POINT = 0x5A11EE  # sweep points and initial states


def seed_root(seed: int | np.random.SeedSequence | None) -> int:
    """32-bit root; a SeedSequence contributes its first state word, None maps to 0."""
    if seed is None:
        return 0
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, dtype=np.uint32)[0])
    return int(seed) & _MASK


def make_seedseq(seed: int | None = None) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed_root(seed))


def substream(seed: int | np.random.SeedSequence | None, *keys: int) -> np.random.SeedSequence:
    """Child sequence of (root, keys...). Pure: nothing is spawned or consumed."""
    return np.random.SeedSequence([seed_root(seed), *(int(k) & _MASK for k in keys)])


@dataclass(frozen=True, init=False)
class RngBundle:
    """Each call returns a fresh Generator positioned at the start of its stream."""

    root: int

    def __init__(self, seed: int | np.random.SeedSequence | None):
        object.__setattr__(self, "root", seed_root(seed))

    def gen(self, tag: int, *keys: int) -> np.random.Generator:
        return np.random.default_rng(substream(self.root, tag, *keys))

    def for_sample(self, i: int) -> np.random.Generator:
        return self.gen(Stream.SAMPLE, i)

    def for_family(self, k_max: int) -> np.random.Generator:
        return self.gen(Stream.FAMILY, k_max)

    def for_restart(self, k: int, r: int) -> np.random.Generator:
        return self.gen(Stream.RESTART, k, r)

    def for_point(self, idx: int) -> np.random.Generator:
        return self.gen(Stream.POINT, idx)
