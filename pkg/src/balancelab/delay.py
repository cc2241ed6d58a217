"""Fixed-capacity ring buffer realizing the delayed signal lookup."""

from __future__ import annotations

import numpy as np


class DelayBuffer:
    """History of a scalar signal with exact lookup ``delay_steps`` writes back.

    Capacity is ``delay_steps + 1`` and never changes.  The stepping
    convention is read-then-push: within one integration step the delayed
    value is read first, the new sample pushed after the state update.
    """

    __slots__ = ("storage", "cursor")

    def __init__(self, delay_steps: int, fill: float = 0.0):
        if delay_steps < 1:
            raise ValueError("delay_steps must be >= 1")
        if not np.isfinite(fill):
            raise ValueError("fill value must be finite")
        self.storage = np.full(delay_steps + 1, float(fill))
        self.cursor = 0

    @property
    def capacity(self) -> int:
        return len(self.storage)

    @property
    def delay_steps(self) -> int:
        return len(self.storage) - 1

    def read_delayed(self) -> float:
        """Value written exactly ``delay_steps`` pushes ago (pre-fill before that)."""
        return float(self.storage[self.cursor])

    def push(self, value: float) -> None:
        self.storage[self.cursor] = value
        self.cursor = (self.cursor + 1) % len(self.storage)

    def scale(self, factor: float) -> None:
        """In-place scaling of the whole history (used by renormalization)."""
        self.storage *= factor

    def copy(self) -> "DelayBuffer":
        out = DelayBuffer.__new__(DelayBuffer)
        out.storage = self.storage.copy()
        out.cursor = self.cursor
        return out
