"""Seedable counter-based random streams.

All randomness in the package flows from a single integer seed through
named substreams.  A substream is identified by a tuple of hashable
labels (strings and integers), e.g. ``("dp-noise", round, player, epoch)``.
Each substream is an independent Philox generator keyed by a digest of
(seed, labels), so results do not depend on the order in which streams
are created or consumed.
"""

from __future__ import annotations

import hashlib

import numpy as np


class RandomSource:
    """Root of all randomness for one run."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, *labels) -> np.random.Generator:
        """Independent generator for the substream named by ``labels``."""
        for part in labels:
            if not isinstance(part, (str, int, np.integer)):
                raise TypeError(f"substream labels must be str or int, got {type(part)!r}")
        digest = hashlib.sha256(repr((self.seed,) + tuple(labels)).encode()).digest()
        key = int.from_bytes(digest[:16], "little")
        return np.random.Generator(np.random.Philox(key=key))

    def spawn(self, *labels) -> "RandomSource":
        """Derived source whose streams are disjoint from the parent's."""
        digest = hashlib.sha256(repr((self.seed, "spawn") + tuple(labels)).encode()).digest()
        return RandomSource(int.from_bytes(digest[:8], "little"))
