"""Deterministic tick engine for the human balancing session.

The engine is synchronous: one ``tick`` call consumes the latest mouse
pixel per subject, advances the model by one display interval (internal
dt substeps with the mouse position zero-order held), and returns the
state message for broadcasting.  Real-time pacing, sockets, and disk
writing live in :mod:`balancelab.server`; tests drive the engine at full
speed.

Row ``tick`` k holds the state at t = k / tick_rate, so the final row of
a record is the first tick at which the termination predicate held.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .models import init_single, init_coupled, drive_base
from .params import ModelParams
from .screen import model_to_px, px_to_model
from .trial import TrialRecord

# Experiment defaults: alpha = beta = 21, rod length 1; the controller
# noise strength is irrelevant once the base is human-driven.
EXPERIMENT_PARAMS = ModelParams(gamma=50.0, alpha=21.0, beta=21.0,
                                nu=0.6, tau=0.1, dt=1e-3)


@dataclass(frozen=True)
class SessionConfig:
    mode: str = "single"                    # "single" | "coupled"
    params: ModelParams = EXPERIMENT_PARAMS
    rod_length: float = 1.0                 # display offset between the two tips
    tick_rate: float = 50.0
    max_duration: float = 600.0
    visible: float = 3.0                    # range is [-visible, visible]
    screen_width: int = 1200
    countdown: int = 3
    session_code: str = "trial"

    def __post_init__(self):
        if self.mode not in ("single", "coupled"):
            raise ValueError(f"mode must be 'single' or 'coupled', got {self.mode!r}")
        if self.tick_rate <= 0:
            raise ValueError("tick_rate must be > 0")
        if self.visible <= 0:
            raise ValueError("visible range must be nonempty")
        if self.screen_width < 2:
            raise ValueError("screen_width must be >= 2")
        sub = round(1.0 / (self.tick_rate * self.params.dt))
        if abs(sub * self.tick_rate * self.params.dt - 1.0) > 1e-9:
            raise ValueError("tick interval must be an exact multiple of dt")

    @property
    def n_subjects(self) -> int:
        return 1 if self.mode == "single" else 2

    @property
    def substeps(self) -> int:
        return round(1.0 / (self.tick_rate * self.params.dt))

    @property
    def max_ticks(self) -> int:
        return round(self.max_duration * self.tick_rate)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "params": self.params.to_dict(),
            "rod_length": self.rod_length,
            "tick_rate": self.tick_rate,
            "max_duration": self.max_duration,
            "visible": self.visible,
            "screen_width": self.screen_width,
            "countdown": self.countdown,
            "session_code": self.session_code,
        }


class SessionEngine:
    """Runs one session tick by tick; independent of clocks and sockets."""

    def __init__(self, config: SessionConfig, subjects=None):
        self.config = config
        self.subjects = list(subjects) if subjects else \
            [f"subject{i+1}" for i in range(config.n_subjects)]
        if config.mode == "single":
            self.state = init_single(config.params)
            bases = [self.state.x_M]
        else:
            self.state = init_coupled(config.params)
            bases = [self.state.q_M1, self.state.q_M2]
        self._px = [model_to_px(b, config.screen_width, config.visible)
                    for b in bases]
        self._prev_bases = list(bases)
        self.tick_index = 0
        self.rows = []
        self.ended = None       # termination cause once set

    # -- screen helpers -----------------------------------------------------

    def _to_px(self, x: float) -> int:
        return model_to_px(x, self.config.screen_width, self.config.visible)

    def thick_px(self) -> list:
        c = self.config
        if c.mode == "single":
            return [self._to_px(self.state.x_T)]
        half = c.rod_length / 2.0
        return [self._to_px(self.state.q_T - half), self._to_px(self.state.q_T + half)]

    def thin_px(self) -> list:
        if self.config.mode == "single":
            return [self._to_px(self.state.x_M)]
        return [self._to_px(self.state.q_M1), self._to_px(self.state.q_M2)]

    # -- dynamics -----------------------------------------------------------

    def _out_of_range(self) -> bool:
        c = self.config
        v = c.visible
        if c.mode == "single":
            coords = (self.state.x_T, self.state.x_M)
        else:
            half = c.rod_length / 2.0
            coords = (self.state.q_T - half, self.state.q_T + half,
                      self.state.q_M1, self.state.q_M2)
        return any(abs(x) > v for x in coords)

    def _snapshot_row(self) -> dict:
        c = self.config
        k = self.tick_index
        t = k / c.tick_rate
        rate = c.tick_rate
        if c.mode == "single":
            bases = [self.state.x_M]
            row = {"tick": k, "t": t,
                   "x_T": self.state.x_T, "x_M": self.state.x_M,
                   "delta": self.state.delta,
                   "v_tip": self.state.v_T,
                   "v_base": [(bases[0] - self._prev_bases[0]) * rate if k else 0.0],
                   "px": list(self._px)}
        else:
            bases = [self.state.q_M1, self.state.q_M2]
            row = {"tick": k, "t": t,
                   "q_T": self.state.q_T,
                   "q_M1": self.state.q_M1, "q_M2": self.state.q_M2,
                   "delta1": self.state.delta1, "delta2": self.state.delta2,
                   "v_tip": self.state.v_qT,
                   "v_base": [(b - p) * rate if k else 0.0
                              for b, p in zip(bases, self._prev_bases)],
                   "px": list(self._px)}
        self._prev_bases = bases
        return row

    def tick(self, inputs: dict | None = None):
        """Advance one display tick.

        ``inputs`` maps subject index (1-based) to the latest mouse pixel;
        missing subjects hold their previous pixel.  Returns
        (state_message, end_cause); end_cause is None while running.
        """
        if self.ended is not None:
            raise RuntimeError(f"session already ended ({self.ended})")
        c = self.config
        for idx, px in (inputs or {}).items():
            if px is None:
                continue
            px = int(px)
            if not (1 <= px <= c.screen_width):
                raise ValueError(f"px {px} outside [1, {c.screen_width}]")
            self._px[idx - 1] = px

        row = self._snapshot_row()
        self.rows.append(row)
        msg = {"type": "state", "tick": self.tick_index,
               "thick": self.thick_px(), "thin": self.thin_px()}

        if self._out_of_range():
            self.ended = "out-of-range"
        elif self.tick_index == c.max_ticks - 1:
            self.ended = "completed"
        else:
            targets = [px_to_model(p, c.screen_width, c.visible) for p in self._px]
            ext = targets[0] if c.mode == "single" else tuple(targets)
            for _ in range(c.substeps):
                drive_base(self.state, c.params, ext)
            self.tick_index += 1
        return msg, self.ended

    def abort(self, cause: str = "aborted-by-subject") -> None:
        if self.ended is None:
            self.ended = cause

    def record(self) -> TrialRecord:
        return TrialRecord(self.config.to_dict(), list(self.subjects),
                           list(self.rows), self.ended)
