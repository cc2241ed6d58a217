"""Workbench for single and mechanically coupled balancing tasks with
time-delayed, randomly modulated feedback."""

from .params import ModelParams
from .noise import NoiseStream, noise_pair
from .delay import DelayBuffer
from .timeseries import TimeSeries
from .models import (
    SingleState, CoupledState, NonlinearState,
    init_single, init_coupled, init_nonlinear,
    step_single, step_coupled, step_nonlinear,
    drive_base, simulate, SimulationResult,
)
from .stability import (
    LyapunovEstimate, BetaCalibration,
    largest_lyapunov, characteristic_root, calibrate_beta, refine_beta,
    lyapunov_sweep,
)
from .errors import BalancelabError, DivergenceError, CalibrationError, TrialFormatError

__version__ = "0.1.0"
