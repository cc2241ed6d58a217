import json

import numpy as np
import pytest

from balancelab.errors import TrialFormatError
from balancelab.trial import (
    FORMAT_VERSION, TrialRecord, TrialWriter, persist, load, replay,
)


def make_record(n=10, mode="single", cause="completed"):
    config = {"mode": mode, "tick_rate": 50.0, "max_duration": 600.0,
              "visible": 3.0, "screen_width": 1200}
    rows = []
    for k in range(n):
        t = k / 50.0
        if mode == "single":
            rows.append({"tick": k, "t": t, "x_T": -0.5 + 0.01 * k,
                         "x_M": -0.6, "delta": 0.1 + 0.01 * k,
                         "v_tip": 0.0, "v_base": [0.0], "px": [481]})
        else:
            rows.append({"tick": k, "t": t, "q_T": -0.5, "q_M1": -0.6,
                         "q_M2": 0.6, "delta1": 0.1, "delta2": -1.1,
                         "v_tip": 0.0, "v_base": [0.0, 0.0],
                         "px": [481, 721]})
    subjects = ["s1"] if mode == "single" else ["s1", "s2"]
    return TrialRecord(config, subjects, rows, cause)


def test_round_trip(tmp_path):
    rec = make_record(20)
    path = tmp_path / "a.trial.jsonl"
    persist(rec, path)
    back = load(path)
    assert back.config == rec.config
    assert back.subjects == rec.subjects
    assert back.rows == rec.rows
    assert back.termination_cause == "completed"
    assert not back.truncated


def test_header_first_line(tmp_path):
    path = tmp_path / "a.trial.jsonl"
    persist(make_record(3), path)
    first = json.loads(path.read_text().splitlines()[0])
    assert first["format_version"] == FORMAT_VERSION
    assert "config" in first


def test_truncated_file_yields_prefix(tmp_path):
    path = tmp_path / "a.trial.jsonl"
    persist(make_record(10), path)
    lines = path.read_text().splitlines()
    # drop the end marker and the last two rows, as after a crash
    (tmp_path / "b.trial.jsonl").write_text("\n".join(lines[:-3]) + "\n")
    back = load(tmp_path / "b.trial.jsonl")
    assert back.truncated
    assert back.termination_cause is None
    assert len(back.rows) == 8


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "a.trial.jsonl"
    persist(make_record(5), path)
    lines = path.read_text().splitlines()
    lines[3] = '{"tick": 2, "broken'
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TrialFormatError) as e:
        load(path)
    assert e.value.line == 4


def test_tick_gap_rejected(tmp_path):
    path = tmp_path / "a.trial.jsonl"
    persist(make_record(5), path)
    lines = path.read_text().splitlines()
    del lines[3]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TrialFormatError):
        load(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "a.trial.jsonl"
    path.write_text(json.dumps({"format_version": 99, "config": {}}) + "\n")
    with pytest.raises(TrialFormatError):
        load(path)


def test_empty_file(tmp_path):
    path = tmp_path / "a.trial.jsonl"
    path.write_text("")
    with pytest.raises(TrialFormatError):
        load(path)


def test_live_writer_appends(tmp_path):
    path = tmp_path / "live.trial.jsonl"
    rec = make_record(4)
    w = TrialWriter(path, rec.config, rec.subjects)
    for row in rec.rows[:2]:
        w.write_row(row)
    w.close()   # simulated crash: no end marker
    back = load(path)
    assert back.truncated and len(back.rows) == 2


def test_validate_rejects_bad_cause():
    rec = make_record(3, cause="exploded")
    with pytest.raises(ValueError):
        rec.validate()


def test_replay_single_channels():
    rec = make_record(10)
    ch = replay(rec)
    assert set(ch) == {"x_T", "x_M", "delta", "tip_velocity", "base_velocity"}
    np.testing.assert_allclose(ch["delta"].samples,
                               ch["x_T"].samples - ch["x_M"].samples)
    # positions move 0.01 per tick at 50 Hz -> velocity 0.5 after the first
    assert ch["tip_velocity"].samples[0] == 0.0
    np.testing.assert_allclose(ch["tip_velocity"].samples[1:], 0.5)
    assert ch["x_T"].dt_sample == pytest.approx(0.02)


def test_replay_coupled_channels():
    rec = make_record(10, mode="coupled")
    ch = replay(rec, channels=("delta1", "base2_velocity"))
    assert set(ch) == {"delta1", "base2_velocity"}
    np.testing.assert_allclose(ch["delta1"].samples, 0.1)


def test_replay_unknown_channel():
    with pytest.raises(ValueError):
        replay(make_record(5), channels=("theta",))


def test_replay_empty_record():
    with pytest.raises(ValueError):
        replay(make_record(0))
