import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emwave import SignalSet
from emwave.errors import ConfigError, SignalFormatError
from emwave.io import load_scenario, load_signals_csv, parse_scenario, write_signals_csv


def write(path, text):
    path.write_text(text)
    return path


@settings(max_examples=25, deadline=None)
@given(data=arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 40)),
                   elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_csv_round_trip(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    labels = tuple(f"bus{i}" for i in range(data.shape[0]))
    sig = SignalSet(10.0, 0.0, labels, data)
    write_signals_csv(sig, path)
    back = load_signals_csv(path)
    assert back.labels == labels
    assert back.sample_rate == 10.0
    assert np.max(np.abs(back.data - data)) <= 1e-9


def test_infers_rate(tmp_path):
    rows = "\n".join(f"{k / 10:.1f},{k},0,1" for k in range(30))
    sig = load_signals_csv(write(tmp_path / "a.csv", "time,a,b,c\n" + rows + "\n"))
    assert sig.sample_rate == 10.0
    assert sig.start_time == 0.0
    assert sig.data.shape == (3, 30)


def test_missing_cell_names_row_and_column(tmp_path):
    text = "time,a,b\n0.0,1,2\n0.1,1,\n0.2,1,2\n"
    with pytest.raises(SignalFormatError, match=r"row 3, column 'b'"):
        load_signals_csv(write(tmp_path / "m.csv", text))


def test_jitter_rejected(tmp_path):
    times = [0.0, 0.1, 0.2, 0.305, 0.4, 0.5]
    text = "time,a\n" + "".join(f"{t},0\n" for t in times)
    with pytest.raises(SignalFormatError, match="nonuniform sampling"):
        load_signals_csv(write(tmp_path / "j.csv", text))


def test_small_jitter_tolerated(tmp_path):
    times = [0.0, 0.1, 0.2, 0.3005, 0.4, 0.5]
    text = "time,a\n" + "".join(f"{t},0\n" for t in times)
    assert load_signals_csv(write(tmp_path / "j.csv", text)).sample_rate == 10.0


def test_duplicate_labels(tmp_path):
    with pytest.raises(SignalFormatError, match="duplicate"):
        load_signals_csv(write(tmp_path / "d.csv", "time,a,a\n0,1,2\n0.1,1,2\n"))


def test_empty_file(tmp_path):
    with pytest.raises(SignalFormatError, match="empty"):
        load_signals_csv(write(tmp_path / "e.csv", ""))


def test_bad_header(tmp_path):
    with pytest.raises(SignalFormatError, match="time"):
        load_signals_csv(write(tmp_path / "h.csv", "t,a\n0,1\n0.1,1\n"))


def test_missing_file(tmp_path):
    with pytest.raises(SignalFormatError):
        load_signals_csv(tmp_path / "nope.csv")


SCENARIO = """
[network]
topology = "two_area"
n = 2
weak_tie_b = 0.2

[generator]
inertia = 5.0

[[override]]
node = 1
rating = 50.0

[[event]]
node = 3
time = 2.0
delta_p = -0.02

[simulation]
duration = 12.0
"""


def test_load_scenario(tmp_path):
    scen = load_scenario(write(tmp_path / "s.toml", SCENARIO))
    assert scen.model.n == 4
    assert scen.model.generators[0].inertia == 5.0
    assert scen.model.generators[1].rating == 50.0
    assert scen.events[0].node == 3 and scen.events[0].delta_p == -0.02
    assert scen.event_time == 2.0
    assert scen.duration == 12.0 and scen.dt_internal == 1e-3


def test_scenario_unknown_key():
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_scenario({"network": {"n": 4, "size": 3}})


def test_scenario_needs_network():
    with pytest.raises(ConfigError):
        parse_scenario({"event": []})


def test_scenario_bad_toml(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(write(tmp_path / "b.toml", "[network\nn=3"))
