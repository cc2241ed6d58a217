"""Statistics of the balancing errors.

RMS ensembles, averaged-periodogram power spectra with two-regime
power-law fits, velocity density ratios, short-time cross-correlation
(STCC) with first-dominant-peak extraction, peak-point densities, and the
trial report tables.  All operations are pure on immutable inputs; CSV
emission lives at the bottom.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _signal

from . import _kernels
from .models import simulate
from .params import ModelParams
from .timeseries import TimeSeries

DEFAULT_SEGMENT_LEN = 2 ** 14
DEFAULT_OVERLAP = 0.5
DEFAULT_LAG_MAX = 0.5
DEFAULT_PROMINENCE = 0.8
DEFAULT_WINDOW = 5.0
DEFAULT_HOP = 1.0
PEAK_BIN_WIDTH = 0.01
MIN_BIN_COUNT = 100


# ---------------------------------------------------------------------------
# amplitude statistics

def rms(series: TimeSeries) -> float:
    """Root mean square, no mean removal."""
    if len(series) == 0:
        raise ValueError("rms of an empty series")
    return float(np.sqrt(np.mean(series.samples ** 2)))


@dataclass
class EnsembleRms:
    values: np.ndarray          # RMS per surviving realization
    n_diverged: int
    mean_log10: float

    @property
    def mean_rms(self) -> float:
        """Headline number: exponentiated mean of the log10 values."""
        return float(10.0 ** self.mean_log10)


def ensemble_rms(kind: str, params: ModelParams, horizon: float,
                 n_real: int, channel: str | None = None,
                 downsample: int = 10) -> EnsembleRms:
    """RMS of the balancing error over independent noise realizations.

    The headline mean is the mean of the log10 values (the ensemble spans
    orders of magnitude).  Diverged realizations are excluded and counted.
    """
    if n_real < 2:
        raise ValueError("n_real must be >= 2")
    if channel is None:
        channel = "delta" if kind == "single" else "delta1"
    vals = []
    n_div = 0
    for r in range(n_real):
        res = simulate(kind, params, horizon, channels=(channel,),
                       downsample=downsample, realization=r)
        if res.diverged:
            n_div += 1
            continue
        vals.append(rms(res[channel]))
    vals = np.asarray(vals)
    if len(vals) == 0:
        raise ValueError("all realizations diverged")
    return EnsembleRms(vals, n_div, float(np.mean(np.log10(vals))))


# ---------------------------------------------------------------------------
# spectra

@dataclass
class PowerSpectrum:
    frequencies: np.ndarray
    power: np.ndarray
    segment_len: int
    overlap: float

    def __post_init__(self):
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(self.power < 0):
            raise ValueError("power must be nonnegative")


def power_spectrum(series: TimeSeries, segment_len: int = DEFAULT_SEGMENT_LEN,
                   overlap: float = DEFAULT_OVERLAP) -> PowerSpectrum:
    """One-sided averaged periodogram (Hann window, fractional overlap)."""
    if len(series) < 2:
        raise ValueError("series too short for a spectrum")
    if segment_len > len(series):
        raise ValueError(
            f"segment_len {segment_len} exceeds series length {len(series)}")
    if not (0 <= overlap < 1):
        raise ValueError("overlap must be in [0, 1)")
    fs = 1.0 / series.dt_sample
    freqs, power = _signal.welch(
        series.samples, fs=fs, window="hann", nperseg=segment_len,
        noverlap=int(overlap * segment_len), detrend="constant")
    # drop the DC bin: useless for log-log slope work
    return PowerSpectrum(freqs[1:], power[1:], segment_len, overlap)


@dataclass
class SlopeFit:
    slope_low: float
    slope_high: float
    f_break: float
    residual_low: float
    residual_high: float
    residual_single: float
    improvement: float          # fractional SSR drop vs one straight line
    no_second_regime: bool


def _line_ssr(x, y):
    """Least-squares line fit; returns (slope, intercept, ssr)."""
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    ssr = float(res[0]) if len(res) else float(np.sum((y - A @ coef) ** 2))
    return coef[0], coef[1], ssr


def fit_two_regime_slopes(spectrum: PowerSpectrum, band: tuple,
                          min_points: int = 5,
                          improvement_floor: float = 0.05) -> SlopeFit:
    """Piecewise power-law fit in log-log coordinates.

    Scans candidate breakpoints over the interior bins, fits a line per
    side, keeps the breakpoint minimizing the summed residual, and
    compares against a single straight line.
    """
    f_lo, f_hi = band
    if f_hi / f_lo < 100:
        raise ValueError("band must span at least 2 decades")
    mask = (spectrum.frequencies >= f_lo) & (spectrum.frequencies <= f_hi) \
        & (spectrum.power > 0)
    f = spectrum.frequencies[mask]
    s = spectrum.power[mask]
    if len(f) < 2 * min_points + 1:
        raise ValueError("too few usable bins in the requested band")
    x = np.log10(f)
    y = np.log10(s)
    _, _, ssr1 = _line_ssr(x, y)
    best = None
    for k in range(min_points, len(x) - min_points):
        sl, _, rl = _line_ssr(x[:k], y[:k])
        sh, _, rh = _line_ssr(x[k:], y[k:])
        tot = rl + rh
        if best is None or tot < best[0]:
            best = (tot, k, sl, sh, rl, rh)
    _, k, sl, sh, rl, rh = best
    improvement = 1.0 - (rl + rh) / ssr1 if ssr1 > 0 else 0.0
    return SlopeFit(float(sl), float(sh), float(f[k]), rl, rh, ssr1,
                    float(improvement), improvement < improvement_floor)


# ---------------------------------------------------------------------------
# velocity densities

@dataclass
class DensityRatio:
    bin_centers: np.ndarray
    ratio: np.ndarray


def velocity_density_ratio(coupled_vel: TimeSeries, single_vel: TimeSeries,
                           bins=101, min_count: int = MIN_BIN_COUNT) -> DensityRatio:
    """Histogram-density ratio p(coupled)/p(single) on a shared bin grid.

    When ``bins`` is an integer the grid is symmetric and spans the
    narrower of the two samples (99.5th percentile of |v|); bins where
    either histogram has fewer than ``min_count`` raw counts are omitted.
    """
    a = coupled_vel.samples
    b = single_vel.samples
    if np.isscalar(bins):
        r = min(np.percentile(np.abs(a), 99.5), np.percentile(np.abs(b), 99.5))
        if r <= 0:
            raise ValueError("degenerate velocity range")
        edges = np.linspace(-r, r, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    ca, _ = np.histogram(a, edges)
    cb, _ = np.histogram(b, edges)
    widths = np.diff(edges)
    pa = ca / (len(a) * widths)
    pb = cb / (len(b) * widths)
    supported = (ca >= min_count) & (cb >= min_count)
    if not supported.any():
        raise ValueError("no bin supported by both samples")
    centers = 0.5 * (edges[:-1] + edges[1:])
    return DensityRatio(centers[supported], pa[supported] / pb[supported])


# ---------------------------------------------------------------------------
# short-time cross-correlation

@dataclass
class StccResult:
    lags: np.ndarray            # lag grid, seconds
    coefficients: np.ndarray
    t: float                    # window start
    window: float               # window length


def _lag_grid(dt_sample: float, max_lag: float, symmetric: bool):
    k_max = int(round(max_lag / dt_sample))
    if symmetric:
        return np.arange(-k_max, k_max + 1)
    return np.arange(0, k_max + 1)


def stcc(x: TimeSeries, y: TimeSeries, t: float, window: float = DEFAULT_WINDOW,
         max_lag: float = DEFAULT_LAG_MAX, symmetric: bool = False) -> StccResult:
    """Windowed, mean-removed, variance-normalized cross-correlation.

    The lag grid resolution is the series' sample interval.  Statistics of
    x come from [t, t+window]; statistics of y from the lag-shifted
    segment entering the products, which keeps every coefficient in
    [-1, 1] by Cauchy-Schwarz.
    """
    if abs(x.dt_sample - y.dt_sample) > 1e-12:
        raise ValueError("series must share a sample interval")
    dt = x.dt_sample
    i0 = int(round(t / dt))
    n = int(round(window / dt))
    if n < 2:
        raise ValueError("window too short")
    ks = _lag_grid(dt, max_lag, symmetric)
    lo = i0 + ks.min()
    hi = i0 + n + ks.max()
    if lo < 0 or hi > min(len(x), len(y)):
        raise ValueError("window plus lags falls outside the series")
    out = np.empty((1, len(ks)))
    _kernels.stcc_windows(x.samples, y.samples,
                          np.array([i0], dtype=np.int64), n,
                          ks.astype(np.int64), out)
    r = out[0]
    if np.isnan(r).all():
        raise ValueError("zero variance in window (constant signal)")
    return StccResult(ks * dt, r, t, window)


def first_dominant_peak(result: StccResult, search_range=(0.0, DEFAULT_LAG_MAX),
                        prominence: float = DEFAULT_PROMINENCE) -> float | None:
    """Smallest-lag local maximum reaching ``prominence`` of the window max.

    A local maximum must be strictly greater than both grid neighbors;
    returns None when no lag qualifies.
    """
    lags = result.lags
    r = result.coefficients
    sel = (lags >= search_range[0]) & (lags <= search_range[1])
    idx = np.nonzero(sel)[0]
    if len(idx) == 0:
        raise ValueError("search range outside the lag grid")
    finite = r[idx][np.isfinite(r[idx])]
    if len(finite) == 0:
        return None
    gmax = finite.max()
    for i in idx:
        if i == 0 or i == len(r) - 1:
            continue
        if r[i] > r[i - 1] and r[i] > r[i + 1] and r[i] >= prominence * gmax:
            return float(lags[i])
    return None


@dataclass
class PeakSeries:
    window_starts: np.ndarray
    peaks: np.ndarray           # NaN where no valid peak


def peak_series(x: TimeSeries, y: TimeSeries, window: float = DEFAULT_WINDOW,
                hop: float = DEFAULT_HOP, max_lag: float = DEFAULT_LAG_MAX,
                prominence: float = DEFAULT_PROMINENCE) -> PeakSeries:
    """First-dominant-peak lag per sliding window over a series pair."""
    dt = x.dt_sample
    n = int(round(window / dt))
    k_max = int(round(max_lag / dt))
    hop_s = max(1, int(round(hop / dt)))
    last_start = min(len(x), len(y)) - n - k_max
    if last_start < 0:
        raise ValueError("series shorter than one window plus lags")
    starts = np.arange(0, last_start + 1, hop_s, dtype=np.int64)
    ks = np.arange(0, k_max + 1, dtype=np.int64)
    out = np.empty((len(starts), len(ks)))
    _kernels.stcc_windows(x.samples, y.samples, starts, n, ks, out)
    peaks = _first_peaks_matrix(out, ks * dt, prominence)
    return PeakSeries(starts * dt, peaks)


def _first_peaks_matrix(r: np.ndarray, lag_times: np.ndarray,
                        prominence: float) -> np.ndarray:
    """Vectorized first-dominant-peak over rows of an STCC matrix."""
    n_w, n_l = r.shape
    peaks = np.full(n_w, np.nan)
    with np.errstate(invalid="ignore"):
        gmax = np.nanmax(r, axis=1)
        local = np.zeros_like(r, dtype=bool)
        local[:, 1:-1] = (r[:, 1:-1] > r[:, :-2]) & (r[:, 1:-1] > r[:, 2:])
        qual = local & (r >= prominence * gmax[:, None])
    for w in np.nonzero(qual.any(axis=1))[0]:
        peaks[w] = lag_times[np.argmax(qual[w])]
    return peaks


@dataclass
class PeakDensity:
    bin_edges: np.ndarray
    density: np.ndarray
    n_peaks: int
    n_windows: int

    @property
    def bin_centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def mode_lag(self) -> float:
        return float(self.bin_centers[np.argmax(self.density)])

    @property
    def mode_height(self) -> float:
        return float(self.density.max())


def peak_density(kind: str, params: ModelParams, n_real: int, horizon: float,
                 window: float = DEFAULT_WINDOW, hop: float = DEFAULT_HOP,
                 max_lag: float = DEFAULT_LAG_MAX,
                 prominence: float = DEFAULT_PROMINENCE,
                 downsample: int = 5) -> PeakDensity:
    """Density of tip/base velocity correlation peaks over an ensemble.

    Channels follow the tracking-ability comparison: tip velocity against
    the (first) base velocity.
    """
    if n_real < 2:
        raise ValueError("n_real must be >= 2")
    if kind == "single":
        ch = ("v_T", "v_M")
    elif kind == "coupled":
        ch = ("v_qT", "v_M1")
    else:
        raise ValueError(f"no peak density for kind {kind!r}")
    taus = []
    n_windows = 0
    for r in range(n_real):
        res = simulate(kind, params, horizon, channels=ch,
                       downsample=downsample, realization=r)
        ps = peak_series(res[ch[0]], res[ch[1]], window, hop, max_lag, prominence)
        n_windows += len(ps.peaks)
        taus.extend(ps.peaks[np.isfinite(ps.peaks)])
    taus = np.asarray(taus)
    if len(taus) == 0:
        raise ValueError("no window produced a valid peak")
    edges = np.arange(0.0, max_lag + PEAK_BIN_WIDTH / 2, PEAK_BIN_WIDTH)
    density, _ = np.histogram(taus, edges, density=True)
    return PeakDensity(edges, density, len(taus), n_windows)


# ---------------------------------------------------------------------------
# trial reports

@dataclass
class TrialMetrics:
    subject: str
    mode: str                   # "single" | "coupled"
    trial: int
    tau_hat: float | None
    rms: float


@dataclass
class TrialReport:
    rows: list                  # TrialMetrics
    subject_averages: dict      # (subject, mode) -> (mean tau_hat, mean rms)
    group_stats: dict           # group -> dict with tau/rms mean and std
    excluded: list              # (identifier, reason)


def trial_tau_and_rms(tip_vel: TimeSeries, base_vel: TimeSeries,
                      error: TimeSeries, max_lag: float = DEFAULT_LAG_MAX,
                      prominence: float = DEFAULT_PROMINENCE):
    """One trial's correlation time and balancing-error RMS.

    The correlation time is the first dominant STCC peak with the window
    covering the whole usable span, so the lag quantizes to the record's
    sample interval.
    """
    dt = tip_vel.dt_sample
    span = min(len(tip_vel), len(base_vel)) * dt - max_lag
    res = stcc(tip_vel, base_vel, 0.0, window=span, max_lag=max_lag)
    tau_hat = first_dominant_peak(res, (0.0, max_lag), prominence)
    return tau_hat, rms(error)


def aggregate_trials(rows: list, grouping=None) -> TrialReport:
    """Per-subject averages and per-group (mean, std) summary.

    ``grouping`` maps a TrialMetrics row to a group key; the default
    groups by mode.  Rows with tau_hat None are kept for RMS but skipped
    in the correlation-time averages.
    """
    if grouping is None:
        grouping = lambda m: m.mode
    subj = {}
    for m in rows:
        subj.setdefault((m.subject, m.mode), []).append(m)
    subject_averages = {}
    for key, ms in subj.items():
        taus = [m.tau_hat for m in ms if m.tau_hat is not None]
        subject_averages[key] = (
            float(np.mean(taus)) if taus else None,
            float(np.mean([m.rms for m in ms])),
        )
    groups = {}
    for m in rows:
        groups.setdefault(grouping(m), []).append(m)
    group_stats = {}
    for g, ms in groups.items():
        taus = np.array([m.tau_hat for m in ms if m.tau_hat is not None])
        rmss = np.array([m.rms for m in ms])
        group_stats[g] = {
            "tau_mean": float(taus.mean()) if len(taus) else None,
            "tau_std": float(taus.std(ddof=1)) if len(taus) > 1 else 0.0,
            "rms_mean": float(rmss.mean()),
            "rms_std": float(rmss.std(ddof=1)) if len(rmss) > 1 else 0.0,
            "n": len(ms),
        }
    return TrialReport(list(rows), subject_averages, group_stats, [])


# ---------------------------------------------------------------------------
# CSV emission

def write_csv(path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def spectrum_rows(ps: PowerSpectrum):
    return zip(ps.frequencies.tolist(), ps.power.tolist())


def density_rows(pd: PeakDensity):
    return zip(pd.bin_centers.tolist(), pd.density.tolist())
