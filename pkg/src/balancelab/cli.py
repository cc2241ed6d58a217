"""Operator command line: one subcommand per numerical experiment, the
session service, and trial analysis.

Every run writes a manifest JSON echoing the fully resolved parameters
next to its data files; re-running with ``--config <manifest>`` reproduces
the outputs bit-identically.  Exit codes: 0 success, 2 validation error,
3 divergence, 4 I/O error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import analysis, stability
from .engine import SessionConfig, EXPERIMENT_PARAMS
from .errors import BalancelabError, DivergenceError, TrialFormatError
from .models import simulate, KINDS
from .params import ModelParams
from . import trial as trial_io

EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

PARAM_KEYS = ("gamma", "alpha", "beta", "nu", "tau", "dt", "seed")


def _outdir(out):
    path = Path(out or os.environ.get("BALANCELAB_OUT", "out"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise click.ClickException(f"cannot read config {path}: {e}")
    # a manifest is a valid config: its params block carries the knobs
    if "params" in cfg and isinstance(cfg["params"], dict):
        cfg = cfg["params"]
    unknown = set(cfg) - set(PARAM_KEYS)
    if unknown:
        raise SystemExit2(f"unknown config keys: {sorted(unknown)}")
    return cfg


class SystemExit2(click.ClickException):
    exit_code = EXIT_VALIDATION


def _resolve_params(config, **flags) -> ModelParams:
    merged = dict(config)
    for k, v in flags.items():
        if v is not None:
            merged[k] = v
    try:
        return ModelParams(**merged)
    except (ValueError, TypeError) as e:
        raise SystemExit2(str(e))


def _write_manifest(outdir, name, command, params, extra, outputs):
    manifest = {
        "command": command,
        "params": params.to_dict() if isinstance(params, ModelParams) else params,
        "settings": extra,
        "outputs": [str(p) for p in outputs],
    }
    path = outdir / f"{name}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _param_options(fn):
    for name in ("gamma", "alpha", "beta", "nu", "tau", "dt"):
        fn = click.option(f"--{name}", type=float, default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="JSON file (or a previous manifest) merged under flags")(fn)
    fn = click.option("--out", default=None,
                      help="output directory (env BALANCELAB_OUT)")(fn)
    return fn


@click.group()
def main():
    """Workbench for delayed-feedback balancing models."""


@main.command("simulate")
@_param_options
@click.option("--kind", type=click.Choice(KINDS), default="single")
@click.option("--horizon", type=float, required=True)
@click.option("--downsample", type=int, default=1)
@click.option("--channels", default=None, help="comma-separated channel list")
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv")
@click.option("--allow-divergence", is_flag=True)
def cmd_simulate(kind, horizon, downsample, channels, fmt, allow_divergence,
                 config_path, out, **flags):
    """Integrate one model realization and dump the selected channels."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    if horizon < 0:
        raise SystemExit2("horizon must be >= 0")
    chans = tuple(channels.split(",")) if channels else None
    try:
        res = simulate(kind, params, horizon, channels=chans, downsample=downsample)
    except ValueError as e:
        raise SystemExit2(str(e))
    names = sorted(res.series)
    data_path = outdir / f"simulate-{kind}.{ 'csv' if fmt == 'csv' else 'jsonl' }"
    n = min((len(res.series[c]) for c in names), default=0)
    try:
        if fmt == "csv":
            header = ["t"] + names
            dt_s = params.dt * downsample
            rows = ([i * dt_s] + [res.series[c].samples[i] for c in names]
                    for i in range(n))
            analysis.write_csv(data_path, header, rows)
        else:
            with open(data_path, "w") as fh:
                dt_s = params.dt * downsample
                for i in range(n):
                    fh.write(json.dumps({"t": i * dt_s, **{
                        c: res.series[c].samples[i] for c in names}}) + "\n")
    except OSError as e:
        raise click.ClickException(str(e)) from e
    _write_manifest(outdir, f"simulate-{kind}", "simulate", params,
                    {"kind": kind, "horizon": horizon, "downsample": downsample,
                     "channels": names, "format": fmt,
                     "diverged_at": res.diverged_at},
                    [data_path])
    if res.diverged and not allow_divergence:
        click.echo(f"diverged at t={res.diverged_at:.6g} s", err=True)
        sys.exit(EXIT_DIVERGENCE)


@main.command("lyapunov")
@_param_options
@click.option("--kind", type=click.Choice(["single", "coupled"]), default="single")
@click.option("--horizon", type=float, default=stability.DEFAULT_HORIZON)
@click.option("--renorm-every", type=int, default=stability.DEFAULT_RENORM_EVERY)
@click.option("--norm", type=click.Choice(["headline", "full"]), default="headline")
def cmd_lyapunov(kind, horizon, renorm_every, norm, config_path, out, **flags):
    """Largest Lyapunov exponent of the single or coupled model."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    try:
        est = stability.largest_lyapunov(kind, params, horizon, renorm_every,
                                         norm=norm)
    except (ValueError, BalancelabError) as e:
        raise SystemExit2(str(e))
    result = {"lambda1": est.lambda1, "stderr": est.stderr,
              "horizon": est.horizon, "renorm_interval": est.renorm_interval}
    data_path = outdir / f"lyapunov-{kind}.json"
    with open(data_path, "w") as fh:
        json.dump(result, fh, indent=2)
    _write_manifest(outdir, f"lyapunov-{kind}", "lyapunov", params,
                    {"kind": kind, "horizon": horizon,
                     "renorm_every": renorm_every, "norm": norm, **result},
                    [data_path])
    click.echo(f"lambda1 = {est.lambda1:.6g} +- {est.stderr:.2g}")


@main.command("sweep")
@_param_options
@click.option("--kind", type=click.Choice(["single", "coupled"]), default="single")
@click.option("--beta-min", type=float, default=18.0)
@click.option("--beta-max", type=float, default=24.0)
@click.option("--n-points", type=int, default=13)
@click.option("--n-seeds", type=int, default=1)
@click.option("--horizon", type=float, default=stability.DEFAULT_HORIZON)
def cmd_sweep(kind, beta_min, beta_max, n_points, n_seeds, horizon,
              config_path, out, **flags):
    """Exponent as a function of the feedback gain."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    try:
        rows = stability.lyapunov_sweep(kind, params, (beta_min, beta_max),
                                        n_points, n_seeds, horizon)
    except ValueError as e:
        raise SystemExit2(str(e))
    data_path = outdir / f"sweep-{kind}.csv"
    analysis.write_csv(data_path, ["beta", "lambda1", "stderr"], rows)
    _write_manifest(outdir, f"sweep-{kind}", "sweep", params,
                    {"kind": kind, "beta_range": [beta_min, beta_max],
                     "n_points": n_points, "n_seeds": n_seeds,
                     "horizon": horizon}, [data_path])


@main.command("calibrate")
@_param_options
@click.option("--kind", type=click.Choice(["single", "coupled"]), default="single")
@click.option("--target", type=float, default=5e-4)
@click.option("--bracket-lo", type=float, default=18.0)
@click.option("--bracket-hi", type=float, default=24.0)
@click.option("--n-seeds", type=int, default=stability.DEFAULT_N_SEEDS)
@click.option("--horizon", type=float, default=stability.DEFAULT_HORIZON)
def cmd_calibrate(kind, target, bracket_lo, bracket_hi, n_seeds, horizon,
                  config_path, out, **flags):
    """Bisect the gain to a target exponent."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    try:
        cal = stability.calibrate_beta(kind, params, target,
                                       (bracket_lo, bracket_hi), n_seeds, horizon)
    except (ValueError, BalancelabError) as e:
        raise SystemExit2(str(e))
    result = {"beta_star": cal.beta_star, "target_lambda1": cal.target_lambda1,
              "achieved_lambda1": cal.achieved_lambda1,
              "achieved_stderr": cal.achieved_stderr,
              "bracket": list(cal.bracket), "n_evaluations": cal.n_evaluations}
    data_path = outdir / f"calibrate-{kind}.json"
    with open(data_path, "w") as fh:
        json.dump(result, fh, indent=2)
    _write_manifest(outdir, f"calibrate-{kind}", "calibrate", params,
                    {"kind": kind, "n_seeds": n_seeds, "horizon": horizon,
                     **result}, [data_path])
    click.echo(f"beta* = {cal.beta_star:.4f} "
               f"(lambda1 = {cal.achieved_lambda1:.3g} +- {cal.achieved_stderr:.2g})")


@main.command("spectrum")
@_param_options
@click.option("--kind", type=click.Choice(["single", "coupled"]), default="single")
@click.option("--horizon", type=float, default=1e4)
@click.option("--downsample", type=int, default=10)
@click.option("--segment-len", type=int, default=analysis.DEFAULT_SEGMENT_LEN)
@click.option("--overlap", type=float, default=analysis.DEFAULT_OVERLAP)
@click.option("--band-lo", type=float, default=1e-2)
@click.option("--band-hi", type=float, default=10.0)
@click.option("--allow-divergence", is_flag=True)
def cmd_spectrum(kind, horizon, downsample, segment_len, overlap, band_lo,
                 band_hi, allow_divergence, config_path, out, **flags):
    """Power spectrum of the balancing error plus the two-regime slope fit."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    channel = "delta" if kind == "single" else "delta1"
    res = simulate(kind, params, horizon, channels=(channel,),
                   downsample=downsample)
    if res.diverged and not allow_divergence:
        click.echo(f"diverged at t={res.diverged_at:.6g} s", err=True)
        sys.exit(EXIT_DIVERGENCE)
    try:
        ps = analysis.power_spectrum(res[channel], segment_len, overlap)
        fit = analysis.fit_two_regime_slopes(ps, (band_lo, band_hi))
    except ValueError as e:
        raise SystemExit2(str(e))
    data_path = outdir / f"spectrum-{kind}.csv"
    analysis.write_csv(data_path, ["frequency_hz", "power"],
                       analysis.spectrum_rows(ps))
    _write_manifest(outdir, f"spectrum-{kind}", "spectrum", params,
                    {"kind": kind, "horizon": horizon, "downsample": downsample,
                     "segment_len": segment_len, "overlap": overlap,
                     "band": [band_lo, band_hi],
                     "slope_low": fit.slope_low, "slope_high": fit.slope_high,
                     "f_break": fit.f_break, "improvement": fit.improvement,
                     "no_second_regime": fit.no_second_regime}, [data_path])
    click.echo(f"slopes {fit.slope_low:.3f} / {fit.slope_high:.3f} "
               f"break at {fit.f_break:.4g} Hz")


@main.command("rms-ensemble")
@_param_options
@click.option("--kind", type=click.Choice(["single", "coupled"]), default="single")
@click.option("--horizon", type=float, default=1200.0)
@click.option("--n", "n_real", type=int, default=500)
def cmd_rms_ensemble(kind, horizon, n_real, config_path, out, **flags):
    """RMS of the balancing error over independent realizations."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    try:
        ens = analysis.ensemble_rms(kind, params, horizon, n_real)
    except ValueError as e:
        raise SystemExit2(str(e))
    data_path = outdir / f"rms-{kind}.csv"
    analysis.write_csv(data_path, ["realization", "rms"],
                       enumerate(ens.values.tolist()))
    _write_manifest(outdir, f"rms-{kind}", "rms-ensemble", params,
                    {"kind": kind, "horizon": horizon, "n_real": n_real,
                     "mean_log10_rms": ens.mean_log10,
                     "mean_rms": ens.mean_rms,
                     "n_diverged": ens.n_diverged}, [data_path])
    click.echo(f"mean RMS (log mean) = {ens.mean_rms:.4g}, "
               f"{ens.n_diverged} diverged")


@main.command("velocity-ratio")
@_param_options
@click.option("--beta-single", type=float, required=True)
@click.option("--beta-coupled", type=float, required=True)
@click.option("--horizon", type=float, default=1200.0)
@click.option("--bins", type=int, default=101)
def cmd_velocity_ratio(beta_single, beta_coupled, horizon, bins,
                       config_path, out, **flags):
    """Density ratio of coupled vs single balancing-error velocities."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    single = simulate("single", params.with_(beta=beta_single), horizon,
                      channels=("delta_v",), downsample=10)
    coupled = simulate("coupled", params.with_(beta=beta_coupled), horizon,
                       channels=("delta_v1",), downsample=10)
    try:
        ratio = analysis.velocity_density_ratio(coupled["delta_v1"],
                                                single["delta_v"], bins)
    except ValueError as e:
        raise SystemExit2(str(e))
    data_path = outdir / "velocity-ratio.csv"
    analysis.write_csv(data_path, ["velocity", "ratio"],
                       zip(ratio.bin_centers.tolist(), ratio.ratio.tolist()))
    _write_manifest(outdir, "velocity-ratio", "velocity-ratio", params,
                    {"beta_single": beta_single, "beta_coupled": beta_coupled,
                     "horizon": horizon, "bins": bins}, [data_path])


@main.command("stcc")
@_param_options
@click.option("--kind", type=click.Choice(["single", "coupled"]), default="coupled")
@click.option("--horizon", type=float, default=60.0)
@click.option("--t", "t_start", type=float, default=36.0)
@click.option("--window", type=float, default=analysis.DEFAULT_WINDOW)
@click.option("--max-lag", type=float, default=analysis.DEFAULT_LAG_MAX)
@click.option("--downsample", type=int, default=5)
def cmd_stcc(kind, horizon, t_start, window, max_lag, downsample,
             config_path, out, **flags):
    """Short-time cross-correlation of tip vs base velocities."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    pairs = [("v_T", "v_M")] if kind == "single" else \
        [("v_qT", "v_M1"), ("v_qT", "v_M2")]
    chans = sorted({c for pair in pairs for c in pair})
    res = simulate(kind, params, horizon, channels=chans, downsample=downsample)
    rows = []
    try:
        results = [analysis.stcc(res[a], res[b], t_start, window, max_lag)
                   for a, b in pairs]
    except ValueError as e:
        raise SystemExit2(str(e))
    for i in range(len(results[0].lags)):
        rows.append([results[0].lags[i]] + [r.coefficients[i] for r in results])
    data_path = outdir / f"stcc-{kind}.csv"
    analysis.write_csv(data_path,
                       ["lag_s"] + [f"r_{a}_{b}" for a, b in pairs], rows)
    peaks = [analysis.first_dominant_peak(r, (0.0, max_lag)) for r in results]
    _write_manifest(outdir, f"stcc-{kind}", "stcc", params,
                    {"kind": kind, "horizon": horizon, "t": t_start,
                     "window": window, "max_lag": max_lag,
                     "downsample": downsample, "peaks": peaks}, [data_path])
    click.echo(f"first dominant peaks: {peaks}")


@main.command("peak-density")
@_param_options
@click.option("--kind", type=click.Choice(["single", "coupled"]), default="single")
@click.option("--n", "n_real", type=int, default=100)
@click.option("--horizon", type=float, default=1200.0)
@click.option("--window", type=float, default=analysis.DEFAULT_WINDOW)
@click.option("--hop", type=float, default=analysis.DEFAULT_HOP)
@click.option("--prominence", type=float, default=analysis.DEFAULT_PROMINENCE)
def cmd_peak_density(kind, n_real, horizon, window, hop, prominence,
                     config_path, out, **flags):
    """Density of first-dominant STCC peak lags over an ensemble."""
    outdir = _outdir(out)
    params = _resolve_params(_load_config(config_path), **flags)
    try:
        pd = analysis.peak_density(kind, params, n_real, horizon, window, hop,
                                   prominence=prominence)
    except ValueError as e:
        raise SystemExit2(str(e))
    data_path = outdir / f"peak-density-{kind}.csv"
    analysis.write_csv(data_path, ["lag_s", "density"], analysis.density_rows(pd))
    _write_manifest(outdir, f"peak-density-{kind}", "peak-density", params,
                    {"kind": kind, "n_real": n_real, "horizon": horizon,
                     "window": window, "hop": hop, "prominence": prominence,
                     "mode_lag": pd.mode_lag, "mode_height": pd.mode_height,
                     "n_peaks": pd.n_peaks, "n_windows": pd.n_windows},
                    [data_path])
    click.echo(f"mode at {pd.mode_lag:.3f} s, height {pd.mode_height:.3g}")


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8700)
@click.option("--mode", type=click.Choice(["single", "coupled"]), default="single")
@click.option("--session-code", default="trial")
@click.option("--max-duration", type=float, default=600.0)
@click.option("--tick-rate", type=float, default=50.0)
@click.option("--countdown", type=int, default=3)
@click.option("--out", default=None)
def cmd_serve(host, port, mode, session_code, max_duration, tick_rate,
              countdown, out):
    """Launch the real-time session service."""
    import uvicorn
    from .server import create_app

    outdir = _outdir(out)
    try:
        config = SessionConfig(mode=mode, session_code=session_code,
                               max_duration=max_duration, tick_rate=tick_rate,
                               countdown=countdown)
    except ValueError as e:
        raise SystemExit2(str(e))
    app = create_app(config, outdir)
    click.echo(f"session code: {session_code}")
    click.echo(f"connect: ws://{host}:{port}/ws")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("analyze-trials")
@click.argument("paths", nargs=-1, required=True)
@click.option("--group-by", type=click.Choice(["mode", "subject", "none"]),
              default="mode")
@click.option("--out", default=None)
def cmd_analyze_trials(paths, group_by, out):
    """Correlation-time and RMS report over trial files."""
    outdir = _outdir(out)
    rows = []
    skipped = []
    for path in paths:
        try:
            rec = trial_io.load(path)
        except (OSError, TrialFormatError) as e:
            skipped.append((path, str(e)))
            continue
        if rec.duration < 2 * analysis.DEFAULT_WINDOW:
            skipped.append((path, "shorter than twice the analysis window"))
            continue
        series = trial_io.replay(rec)
        if rec.mode == "single":
            pairs = [(rec.subjects[0], series["tip_velocity"],
                      series["base_velocity"], series["delta"])]
        else:
            pairs = [(rec.subjects[0], series["tip_velocity"],
                      series["base1_velocity"], series["delta1"]),
                     (rec.subjects[1], series["tip_velocity"],
                      series["base2_velocity"], series["delta2"])]
        for subject, tip_v, base_v, err in pairs:
            tau_hat, err_rms = analysis.trial_tau_and_rms(tip_v, base_v, err)
            rows.append(analysis.TrialMetrics(subject, rec.mode,
                                              len(rows), tau_hat, err_rms))
    if not rows:
        click.echo("no usable trial files", err=True)
        sys.exit(EXIT_IO)
    grouping = {"mode": lambda m: m.mode,
                "subject": lambda m: (m.subject, m.mode),
                "none": lambda m: "all"}[group_by]
    report = analysis.aggregate_trials(rows, grouping)
    trial_path = outdir / "trials.csv"
    analysis.write_csv(trial_path, ["subject", "mode", "trial", "tau_hat", "rms"],
                       ([m.subject, m.mode, m.trial,
                         "" if m.tau_hat is None else m.tau_hat, m.rms]
                        for m in report.rows))
    subj_path = outdir / "subject-averages.csv"
    analysis.write_csv(subj_path, ["subject", "mode", "mean_tau_hat", "mean_rms"],
                       ([s, m, "" if t is None else t, r]
                        for (s, m), (t, r) in sorted(report.subject_averages.items())))
    group_path = outdir / "group-stats.csv"
    analysis.write_csv(group_path,
                       ["group", "tau_mean", "tau_std", "rms_mean", "rms_std", "n"],
                       ([str(g), d["tau_mean"], d["tau_std"], d["rms_mean"],
                         d["rms_std"], d["n"]]
                        for g, d in sorted(report.group_stats.items(), key=lambda kv: str(kv[0]))))
    _write_manifest(outdir, "analyze-trials", "analyze-trials", {},
                    {"paths": list(paths), "group_by": group_by,
                     "skipped": skipped},
                    [trial_path, subj_path, group_path])
    for path, reason in skipped:
        click.echo(f"skipped {path}: {reason}", err=True)


if __name__ == "__main__":
    main()
