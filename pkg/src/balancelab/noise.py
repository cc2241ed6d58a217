"""Seeded Gaussian noise streams.

Every stochastic component in the package draws from a :class:`NoiseStream`,
so a (seed, stream, realization) triple pins the full noise sequence and
trajectories are bit-reproducible.  The coupled model uses two streams with
the same seed; ensemble runs vary the realization index.
"""

from __future__ import annotations

import numpy as np


class NoiseStream:
    """Seeded generator of standard Gaussian deviates.

    Streams with the same seed but different ``stream`` or ``realization``
    indices are statistically independent (numpy SeedSequence spawn keys).
    """

    def __init__(self, seed: int, stream: int = 0, realization: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.realization = int(realization)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.realization, self.stream))
        self._rng = np.random.default_rng(ss)

    def normal(self, n: int | None = None):
        """Draw ``n`` standard normal deviates (or a scalar if n is None)."""
        if n is None:
            return self._rng.standard_normal()
        return self._rng.standard_normal(n)


def noise_pair(seed: int, realization: int = 0) -> tuple[NoiseStream, NoiseStream]:
    """Two mutually independent streams for the coupled model's controllers."""
    return NoiseStream(seed, 0, realization), NoiseStream(seed, 1, realization)
