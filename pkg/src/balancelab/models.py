"""Balancing models: states, single-step integrators, and trajectory runs.

Three variants share one stepping convention (explicit Euler-Maruyama,
Ito multiplicative noise entering only through the delayed feedback term):

* single   -- tip/base pair in absolute coordinates,
* coupled  -- two controllers sharing one tip coordinate through a rigid rod,
* nonlinear -- the stick-angle equation the linear single model derives from.

``simulate`` runs the numba kernels for long horizons; the ``step_*``
functions advance one dt and produce bit-identical trajectories when fed
from the same NoiseStream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .delay import DelayBuffer
from .errors import DivergenceError
from .noise import NoiseStream, noise_pair
from .params import ModelParams, DIVERGENCE_GUARD
from .timeseries import TimeSeries

# Initial line positions of the experiment protocol; the base value -0.6
# mirrors the first coupled base (the single-model base start is not listed
# separately in the protocol).
DEFAULT_SINGLE_INIT = {"x_T": -0.5, "x_M": -0.6}
DEFAULT_COUPLED_INIT = {"q_T": -0.5, "q_M1": -0.6, "q_M2": 0.6}

KINDS = ("single", "coupled", "nonlinear")

SINGLE_CHANNELS = ("x_T", "v_T", "x_M", "v_M", "delta", "delta_v", "u")
COUPLED_CHANNELS = ("q_T", "v_qT", "q_M1", "v_M1", "q_M2", "v_M2",
                    "delta1", "delta2", "delta_v1", "delta_v2", "u1", "u2")
NONLINEAR_CHANNELS = ("theta", "omega", "u")


def _check_finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"initial value {name} must be finite, got {v}")


@dataclass
class SingleState:
    x_T: float
    v_T: float
    x_M: float
    v_M: float
    history: DelayBuffer
    t: float = 0.0

    def copy(self):
        return SingleState(self.x_T, self.v_T, self.x_M, self.v_M,
                           self.history.copy(), self.t)

    @property
    def delta(self):
        return self.x_T - self.x_M


@dataclass
class CoupledState:
    q_T: float
    v_qT: float
    q_M1: float
    v_M1: float
    q_M2: float
    v_M2: float
    history1: DelayBuffer
    history2: DelayBuffer
    t: float = 0.0

    def copy(self):
        return CoupledState(self.q_T, self.v_qT, self.q_M1, self.v_M1,
                            self.q_M2, self.v_M2,
                            self.history1.copy(), self.history2.copy(), self.t)

    @property
    def delta1(self):
        return self.q_T - self.q_M1

    @property
    def delta2(self):
        return self.q_T - self.q_M2


@dataclass
class NonlinearState:
    theta: float
    omega: float
    history: DelayBuffer
    t: float = 0.0

    def copy(self):
        return NonlinearState(self.theta, self.omega, self.history.copy(), self.t)


def init_single(params: ModelParams, x_T=None, v_T=0.0, x_M=None, v_M=0.0) -> SingleState:
    """Fresh single-model state; delay history pre-filled with the initial delta."""
    if x_T is None:
        x_T = DEFAULT_SINGLE_INIT["x_T"]
    if x_M is None:
        x_M = DEFAULT_SINGLE_INIT["x_M"]
    _check_finite(x_T=x_T, v_T=v_T, x_M=x_M, v_M=v_M)
    hist = DelayBuffer(params.delay_steps, fill=x_T - x_M)
    return SingleState(x_T, v_T, x_M, v_M, hist, 0.0)


def init_coupled(params: ModelParams, q_T=None, v_qT=0.0,
                 q_M1=None, v_M1=0.0, q_M2=None, v_M2=0.0) -> CoupledState:
    if q_T is None:
        q_T = DEFAULT_COUPLED_INIT["q_T"]
    if q_M1 is None:
        q_M1 = DEFAULT_COUPLED_INIT["q_M1"]
    if q_M2 is None:
        q_M2 = DEFAULT_COUPLED_INIT["q_M2"]
    _check_finite(q_T=q_T, v_qT=v_qT, q_M1=q_M1, v_M1=v_M1, q_M2=q_M2, v_M2=v_M2)
    h1 = DelayBuffer(params.delay_steps, fill=q_T - q_M1)
    h2 = DelayBuffer(params.delay_steps, fill=q_T - q_M2)
    return CoupledState(q_T, v_qT, q_M1, v_M1, q_M2, v_M2, h1, h2, 0.0)


def init_nonlinear(params: ModelParams, theta=0.1, omega=0.0) -> NonlinearState:
    _check_finite(theta=theta, omega=omega)
    hist = DelayBuffer(params.delay_steps, fill=theta)
    return NonlinearState(theta, omega, hist, 0.0)


def _guard(state, values, t):
    for v in values:
        if not math.isfinite(v) or abs(v) > DIVERGENCE_GUARD:
            raise DivergenceError(t)


def step_single(state: SingleState, params: ModelParams, noise: NoiseStream) -> SingleState:
    """One Euler-Maruyama step of the tip/base pair."""
    p = params
    dt = p.dt
    sqdt = math.sqrt(dt)
    z = noise.normal()
    d_del = state.history.read_delayed()
    d_now = state.x_T - state.x_M
    vT = state.v_T + dt * (-p.gamma * state.v_T + p.alpha * d_now)
    vM = (state.v_M + dt * (-p.gamma * state.v_M + p.beta * d_del)
          + p.beta * p.nu * d_del * sqdt * z)
    xT = state.x_T + dt * state.v_T
    xM = state.x_M + dt * state.v_M
    state.x_T, state.v_T, state.x_M, state.v_M = xT, vT, xM, vM
    state.history.push(xT - xM)
    state.t += dt
    _guard(state, (xT, vT, xM, vM), state.t)
    return state


def step_coupled(state: CoupledState, params: ModelParams,
                 noise1: NoiseStream, noise2: NoiseStream) -> CoupledState:
    """One step of the rod-coupled pair: shared tip, independent controllers."""
    p = params
    dt = p.dt
    sqdt = math.sqrt(dt)
    z1 = noise1.normal()
    z2 = noise2.normal()
    d1_del = state.history1.read_delayed()
    d2_del = state.history2.read_delayed()
    d1 = state.q_T - state.q_M1
    d2 = state.q_T - state.q_M2
    vT = state.v_qT + dt * (-p.gamma * state.v_qT + 0.5 * p.alpha * (d1 + d2))
    vM1 = (state.v_M1 + dt * (-p.gamma * state.v_M1 + p.beta * d1_del)
           + p.beta * p.nu * d1_del * sqdt * z1)
    vM2 = (state.v_M2 + dt * (-p.gamma * state.v_M2 + p.beta * d2_del)
           + p.beta * p.nu * d2_del * sqdt * z2)
    qT = state.q_T + dt * state.v_qT
    qM1 = state.q_M1 + dt * state.v_M1
    qM2 = state.q_M2 + dt * state.v_M2
    state.q_T, state.v_qT = qT, vT
    state.q_M1, state.v_M1 = qM1, vM1
    state.q_M2, state.v_M2 = qM2, vM2
    state.history1.push(qT - qM1)
    state.history2.push(qT - qM2)
    state.t += dt
    _guard(state, (qT, vT, qM1, vM1, qM2, vM2), state.t)
    return state


def step_nonlinear(state: NonlinearState, params: ModelParams,
                   noise: NoiseStream) -> NonlinearState:
    p = params
    dt = p.dt
    sqdt = math.sqrt(dt)
    z = noise.normal()
    th_del = state.history.read_delayed()
    om = (state.omega + dt * (-p.gamma * state.omega + p.alpha * math.sin(state.theta)
                              - p.beta * th_del)
          - p.beta * p.nu * th_del * sqdt * z)
    th = state.theta + dt * state.omega
    state.theta, state.omega = th, om
    state.history.push(th)
    state.t += dt
    _guard(state, (th, om), state.t)
    return state


def drive_base(state, params: ModelParams, external):
    """Advance one dt with the base position supplied externally.

    The controller equation for the base is replaced: the base jumps to the
    supplied position (zero-order hold between samples is the caller's job)
    and its velocity is the backward finite difference.  The tip keeps its
    own dynamics and no noise enters (noise lives in the replaced
    controller term).

    For a SingleState ``external`` is one position; for a CoupledState a
    pair (p1, p2).
    """
    p = params
    dt = p.dt
    if isinstance(state, SingleState):
        x_ext = float(external)
        if not math.isfinite(x_ext):
            raise ValueError("external base position must be finite")
        d_now = state.x_T - state.x_M
        vT = state.v_T + dt * (-p.gamma * state.v_T + p.alpha * d_now)
        xT = state.x_T + dt * state.v_T
        vM = (x_ext - state.x_M) / dt
        state.x_T, state.v_T = xT, vT
        state.x_M, state.v_M = x_ext, vM
        state.history.push(xT - x_ext)
        state.t += dt
        _guard(state, (xT, vT), state.t)
        return state
    if isinstance(state, CoupledState):
        p1, p2 = (float(external[0]), float(external[1]))
        if not (math.isfinite(p1) and math.isfinite(p2)):
            raise ValueError("external base positions must be finite")
        d1 = state.q_T - state.q_M1
        d2 = state.q_T - state.q_M2
        vT = state.v_qT + dt * (-p.gamma * state.v_qT + 0.5 * p.alpha * (d1 + d2))
        qT = state.q_T + dt * state.v_qT
        vM1 = (p1 - state.q_M1) / dt
        vM2 = (p2 - state.q_M2) / dt
        state.q_T, state.v_qT = qT, vT
        state.q_M1, state.v_M1 = p1, vM1
        state.q_M2, state.v_M2 = p2, vM2
        state.history1.push(qT - p1)
        state.history2.push(qT - p2)
        state.t += dt
        _guard(state, (qT, vT), state.t)
        return state
    raise TypeError(f"drive_base does not support {type(state).__name__}")


@dataclass
class SimulationResult:
    kind: str
    params: ModelParams
    series: dict
    diverged_at: float | None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    def __getitem__(self, channel: str) -> TimeSeries:
        return self.series[channel]


def _derive_single(raw, want, dt_s):
    xT, vT, xM, vM, u = raw
    table = {
        "x_T": lambda: xT, "v_T": lambda: vT, "x_M": lambda: xM, "v_M": lambda: vM,
        "delta": lambda: xT - xM, "delta_v": lambda: vT - vM, "u": lambda: u,
    }
    return {c: TimeSeries(table[c]().copy(), dt_s, c) for c in want}


def _derive_coupled(raw, want, dt_s):
    qT, vqT, qM1, vM1, qM2, vM2, u1, u2 = raw
    table = {
        "q_T": lambda: qT, "v_qT": lambda: vqT,
        "q_M1": lambda: qM1, "v_M1": lambda: vM1,
        "q_M2": lambda: qM2, "v_M2": lambda: vM2,
        "delta1": lambda: qT - qM1, "delta2": lambda: qT - qM2,
        "delta_v1": lambda: vqT - vM1, "delta_v2": lambda: vqT - vM2,
        "u1": lambda: u1, "u2": lambda: u2,
    }
    return {c: TimeSeries(table[c]().copy(), dt_s, c) for c in want}


def simulate(kind: str, params: ModelParams, horizon: float,
             channels=None, downsample: int = 1, realization: int = 0,
             initial: dict | None = None) -> SimulationResult:
    """Integrate a model over ``horizon`` seconds and record channels.

    Deterministic for fixed (params.seed, kind, horizon, realization).
    On divergence the partial series is retained and ``diverged_at`` set.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if downsample < 1:
        raise ValueError("downsample must be >= 1")
    p = params
    n_steps = round(horizon / p.dt)
    ds = int(downsample)
    dt_s = p.dt * ds
    n_out = n_steps // ds + 1
    initial = initial or {}

    if kind == "single":
        want = tuple(channels) if channels else SINGLE_CHANNELS
        unknown = set(want) - set(SINGLE_CHANNELS)
        if unknown:
            raise ValueError(f"unknown channels {sorted(unknown)}")
        st = init_single(p, **initial)
        state = np.array([st.x_T, st.v_T, st.x_M, st.v_M])
        z = NoiseStream(p.seed, 0, realization).normal(n_steps)
        out = np.empty((5, n_out))
        _, nrec, div = _kernels.run_single(
            state, st.history.storage, st.history.cursor, z,
            p.gamma, p.alpha, p.beta, p.nu, p.dt, ds, out)
        series = _derive_single(out[:, :nrec], want, dt_s)
    elif kind == "coupled":
        want = tuple(channels) if channels else COUPLED_CHANNELS
        unknown = set(want) - set(COUPLED_CHANNELS)
        if unknown:
            raise ValueError(f"unknown channels {sorted(unknown)}")
        st = init_coupled(p, **initial)
        state = np.array([st.q_T, st.v_qT, st.q_M1, st.v_M1, st.q_M2, st.v_M2])
        n1, n2 = noise_pair(p.seed, realization)
        z1 = n1.normal(n_steps)
        z2 = n2.normal(n_steps)
        out = np.empty((8, n_out))
        _, _, nrec, div = _kernels.run_coupled(
            state, st.history1.storage, st.history2.storage,
            st.history1.cursor, st.history2.cursor, z1, z2,
            p.gamma, p.alpha, p.beta, p.nu, p.dt, ds, out)
        series = _derive_coupled(out[:, :nrec], want, dt_s)
    else:
        want = tuple(channels) if channels else NONLINEAR_CHANNELS
        unknown = set(want) - set(NONLINEAR_CHANNELS)
        if unknown:
            raise ValueError(f"unknown channels {sorted(unknown)}")
        st = init_nonlinear(p, **initial)
        state = np.array([st.theta, st.omega])
        z = NoiseStream(p.seed, 0, realization).normal(n_steps)
        out = np.empty((3, n_out))
        _, nrec, div = _kernels.run_nonlinear(
            state, st.history.storage, st.history.cursor, z,
            p.gamma, p.alpha, p.beta, p.nu, p.dt, ds, out)
        names = {"theta": 0, "omega": 1, "u": 2}
        series = {c: TimeSeries(out[names[c], :nrec].copy(), dt_s, c) for c in want}

    diverged_at = None if div < 0 else div * p.dt
    return SimulationResult(kind, p, series, diverged_at)
