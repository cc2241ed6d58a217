"""Model parameters for the delayed-feedback balancing models."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace, asdict

#: Default coefficients for the numerical studies (gamma, alpha, nu, tau).
DEFAULT_GAMMA = 50.0
DEFAULT_ALPHA = 22.0
DEFAULT_NU = 0.6
DEFAULT_TAU = 0.1
DEFAULT_DT = 1e-3

#: Divergence guard: any state component above this magnitude ends the run.
DIVERGENCE_GUARD = 1e12


@dataclass(frozen=True)
class ModelParams:
    """All scalar coefficients of the balancing models plus integration settings.

    gamma : damping coefficient (1/s)
    alpha : instability coefficient (1/s^2)
    beta  : feedback gain (1/s^2)
    nu    : multiplicative noise strength (dimensionless)
    tau   : feedback delay (s)
    dt    : integration step (s); tau/dt must be an exact integer
    seed  : RNG seed
    """

    gamma: float = DEFAULT_GAMMA
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_ALPHA
    nu: float = DEFAULT_NU
    tau: float = DEFAULT_TAU
    dt: float = DEFAULT_DT
    seed: int = 0

    def __post_init__(self):
        if not (self.gamma > 0):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not (self.tau > 0):
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not (self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not (self.nu >= 0):
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        ratio = self.tau / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                f"tau/dt must be an exact integer (got tau={self.tau}, dt={self.dt})"
            )
        if self.dt > self.tau / 10 + 1e-15:
            raise ValueError(f"dt must be <= tau/10 to resolve the delay (dt={self.dt})")
        for name in ("gamma", "alpha", "beta", "nu", "tau", "dt"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def delay_steps(self) -> int:
        return round(self.tau / self.dt)

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)
