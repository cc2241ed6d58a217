"""Trial records: persistence (JSON lines) and channel extraction.

A trial file is append-safe: one JSON object per line, a header object
first (config snapshot + format version), then one row per tick, then an
end marker.  A crash loses at most the tick being written; loading a
truncated file yields the valid prefix with a truncation flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import TrialFormatError
from .timeseries import TimeSeries

FORMAT_VERSION = 1
TRIAL_SUFFIX = ".trial.jsonl"

TERMINATION_CAUSES = ("completed", "out-of-range", "aborted-by-subject", "client-lost")


@dataclass
class TrialRecord:
    config: dict
    subjects: list
    rows: list = field(default_factory=list)
    termination_cause: str | None = None
    truncated: bool = False

    @property
    def mode(self) -> str:
        return self.config["mode"]

    @property
    def tick_rate(self) -> float:
        return self.config["tick_rate"]

    @property
    def duration(self) -> float:
        return len(self.rows) / self.tick_rate

    def validate(self):
        for i, row in enumerate(self.rows):
            if row["tick"] != i:
                raise ValueError(f"tick indices not contiguous at row {i}")
        if self.termination_cause is not None \
                and self.termination_cause not in TERMINATION_CAUSES:
            raise ValueError(f"unknown termination cause {self.termination_cause!r}")


class TrialWriter:
    """Append-only writer used live during a session."""

    def __init__(self, path, config: dict, subjects: list):
        self.path = path
        self._fh = open(path, "w")
        header = {"format_version": FORMAT_VERSION, "config": config,
                  "subjects": subjects}
        self._fh.write(json.dumps(header) + "\n")
        self._fh.flush()

    def write_row(self, row: dict) -> None:
        self._fh.write(json.dumps(row) + "\n")

    def finish(self, cause: str) -> None:
        self._fh.write(json.dumps({"end": cause}) + "\n")
        self._fh.flush()
        self._fh.close()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()


def persist(record: TrialRecord, path) -> None:
    """Write a complete record in one go (same layout as the live writer)."""
    record.validate()
    w = TrialWriter(path, record.config, record.subjects)
    for row in record.rows:
        w.write_row(row)
    if record.termination_cause is not None:
        w.finish(record.termination_cause)
    else:
        w.close()


def load(path) -> TrialRecord:
    """Read a trial file; malformed lines raise with their line number."""
    rows = []
    header = None
    cause = None
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise TrialFormatError(ln, f"invalid JSON: {e.msg}") from e
            if ln == 1:
                if "format_version" not in obj or "config" not in obj:
                    raise TrialFormatError(ln, "missing header fields")
                if obj["format_version"] != FORMAT_VERSION:
                    raise TrialFormatError(
                        ln, f"unsupported format version {obj['format_version']}")
                header = obj
            elif "end" in obj:
                cause = obj["end"]
            else:
                if "tick" not in obj:
                    raise TrialFormatError(ln, "row missing tick field")
                if obj["tick"] != len(rows):
                    raise TrialFormatError(
                        ln, f"tick {obj['tick']} breaks contiguity "
                            f"(expected {len(rows)})")
                rows.append(obj)
    if header is None:
        raise TrialFormatError(1, "empty file")
    rec = TrialRecord(header["config"], header.get("subjects", []), rows,
                      cause, truncated=(cause is None))
    return rec


def _finite_diff(p: np.ndarray, rate: float) -> np.ndarray:
    v = np.empty_like(p)
    v[0] = 0.0
    v[1:] = (p[1:] - p[:-1]) * rate
    return v


def replay(record: TrialRecord, channels=None) -> dict:
    """Extract model-unit TimeSeries at the tick rate.

    Single-mode channels: x_T, x_M, delta, tip_velocity, base_velocity.
    Coupled-mode: q_T, q_M1, q_M2, delta1, delta2, tip_velocity,
    base1_velocity, base2_velocity.  Velocities come from backward finite
    differences of the recorded positions.
    """
    if not record.rows:
        raise ValueError("empty record")
    dt = 1.0 / record.tick_rate
    rate = record.tick_rate

    def col(name):
        return np.array([row[name] for row in record.rows], dtype=float)

    if record.mode == "single":
        xT = col("x_T")
        xM = col("x_M")
        table = {
            "x_T": lambda: xT,
            "x_M": lambda: xM,
            "delta": lambda: xT - xM,
            "tip_velocity": lambda: _finite_diff(xT, rate),
            "base_velocity": lambda: _finite_diff(xM, rate),
        }
    else:
        qT = col("q_T")
        qM1 = col("q_M1")
        qM2 = col("q_M2")
        table = {
            "q_T": lambda: qT,
            "q_M1": lambda: qM1,
            "q_M2": lambda: qM2,
            "delta1": lambda: qT - qM1,
            "delta2": lambda: qT - qM2,
            "tip_velocity": lambda: _finite_diff(qT, rate),
            "base1_velocity": lambda: _finite_diff(qM1, rate),
            "base2_velocity": lambda: _finite_diff(qM2, rate),
        }
    want = tuple(channels) if channels else tuple(table)
    unknown = set(want) - set(table)
    if unknown:
        raise ValueError(f"unknown channels {sorted(unknown)}")
    return {c: TimeSeries(table[c](), dt, c) for c in want}
