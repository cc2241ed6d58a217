"""Uniformly sampled scalar channel."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    samples: np.ndarray
    dt_sample: float
    label: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.dt_sample <= 0:
            raise ValueError("dt_sample must be > 0")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt_sample

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt_sample

    def downsample(self, factor: int) -> "TimeSeries":
        if factor < 1:
            raise ValueError("factor must be >= 1")
        return TimeSeries(self.samples[::factor].copy(), self.dt_sample * factor, self.label)
