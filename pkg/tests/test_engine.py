import pytest

from balancelab.engine import EXPERIMENT_PARAMS, SessionConfig, SessionEngine
from balancelab.screen import model_to_px
from balancelab.trial import load, persist, replay


def short_config(mode="single", max_duration=1.0, **kw):
    return SessionConfig(mode=mode, max_duration=max_duration, **kw)


def test_experiment_defaults():
    assert EXPERIMENT_PARAMS.alpha == 21.0
    assert EXPERIMENT_PARAMS.beta == 21.0
    assert EXPERIMENT_PARAMS.gamma == 50.0


def test_config_validation():
    with pytest.raises(ValueError):
        SessionConfig(mode="triple")
    with pytest.raises(ValueError):
        SessionConfig(tick_rate=0)
    with pytest.raises(ValueError):
        SessionConfig(tick_rate=30.0)   # 1/30 s not a multiple of dt


def test_substeps_and_ticks():
    c = SessionConfig()
    assert c.substeps == 20
    assert c.max_ticks == 30000
    assert c.n_subjects == 1
    assert SessionConfig(mode="coupled").n_subjects == 2


def test_first_row_is_initial_state():
    eng = SessionEngine(short_config())
    msg, cause = eng.tick({1: 601})
    assert cause is None
    assert msg["type"] == "state"
    assert msg["tick"] == 0
    row = eng.rows[0]
    assert row["tick"] == 0 and row["t"] == 0.0
    assert row["x_T"] == -0.5
    assert row["x_M"] == -0.6
    assert row["v_base"] == [0.0]


def test_row_times_follow_tick_rate():
    eng = SessionEngine(short_config())
    for _ in range(5):
        eng.tick({})
    assert [r["t"] for r in eng.rows] == pytest.approx([0.0, 0.02, 0.04, 0.06, 0.08])


def test_completed_after_max_ticks():
    c = short_config(max_duration=0.2)   # 10 ticks
    eng = SessionEngine(c)
    center = model_to_px(-0.6)
    cause = None
    while cause is None:
        _, cause = eng.tick({1: center})
    assert cause == "completed"
    assert len(eng.rows) == c.max_ticks
    assert eng.rows[-1]["tick"] == c.max_ticks - 1


def test_out_of_range_on_base():
    eng = SessionEngine(short_config(max_duration=60.0))
    # park the base at the right edge (+3, still inside); the resulting
    # error drives the tip out through the left edge within seconds
    cause = None
    n = 0
    while cause is None and n < 3000:
        _, cause = eng.tick({1: 1200})
        n += 1
    assert cause == "out-of-range"
    assert n < 3000


def test_coupled_tip_offsets():
    eng = SessionEngine(short_config(mode="coupled"))
    msg, _ = eng.tick({})
    # tips sit at q_T -/+ rod_length/2 = -1.0 and 0.0
    assert msg["thick"] == [model_to_px(-1.0), model_to_px(0.0)]
    assert msg["thin"] == [model_to_px(-0.6), model_to_px(0.6)]


def test_missing_input_holds_previous_pixel():
    eng = SessionEngine(short_config())
    eng.tick({1: 700})
    eng.tick({})
    assert eng.rows[1]["px"] == [700]


def test_input_validation():
    eng = SessionEngine(short_config())
    with pytest.raises(ValueError):
        eng.tick({1: 0})
    with pytest.raises(ValueError):
        eng.tick({1: 1201})


def test_tick_after_end_raises():
    eng = SessionEngine(short_config(max_duration=0.04))
    cause = None
    while cause is None:
        _, cause = eng.tick({})
    with pytest.raises(RuntimeError):
        eng.tick({})


def test_abort_sets_cause_once():
    eng = SessionEngine(short_config())
    eng.tick({})
    eng.abort()
    assert eng.ended == "aborted-by-subject"
    eng.abort("client-lost")
    assert eng.ended == "aborted-by-subject"


def test_record_round_trip(tmp_path):
    eng = SessionEngine(short_config(max_duration=0.2))
    cause = None
    while cause is None:
        _, cause = eng.tick({1: model_to_px(-0.6)})
    rec = eng.record()
    rec.validate()
    path = tmp_path / "t.trial.jsonl"
    persist(rec, path)
    back = load(path)
    assert back.termination_cause == cause
    ch = replay(back)
    assert len(ch["delta"]) == len(eng.rows)


def test_base_follows_mouse():
    eng = SessionEngine(short_config())
    target = model_to_px(0.5)
    eng.tick({1: target})
    eng.tick({})
    # after one full tick of substeps the base sits at the target position
    assert eng.rows[1]["x_M"] == pytest.approx(0.5, abs=3e-3)
