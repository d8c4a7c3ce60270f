import pytest
from hypothesis import given, strategies as st

from gubm.analysis import direction_stats, interaction_counts, transition_distance_histogram
from gubm.grid import EventKind

from conftest import make_session


def test_all_downward():
    s = make_session([3, 3, 3], [(0, 0), (1, 2), (2, 1)])
    st_ = direction_stats([s])
    assert (st_.down_fraction, st_.up_fraction) == (1.0, 0.0)


def test_virtual_endpoints_not_counted():
    s = make_session([3, 3], [(1, 1)])
    st_ = direction_stats([s])
    assert st_.empty and st_.same_row == 0
    assert transition_distance_histogram([s]) == {}


def test_single_pair_histogram():
    assert transition_distance_histogram([make_session([4], [(0, 0), (0, 3)])]) == {3: 1.0}


def test_no_pairs():
    assert transition_distance_histogram([]) == {}
    assert direction_stats([]).empty


def test_unit_steps():
    s = make_session([3, 3], [(0, 0), (0, 1), (1, 1), (1, 2)])
    assert transition_distance_histogram([s]) == {1: 1.0}


def test_counts():
    sessions = []
    for k in range(10):
        kinds = [EventKind.CLICK if k < 4 else EventKind.HOVER, EventKind.HOVER]
        sessions.append(make_session([3], [(0, 0), (0, 2)], kinds=kinds, sid=f"s{k}"))
    c = interaction_counts(sessions)
    assert c["click_session_fraction"] == 0.4
    assert c["hover_session_fraction"] == 1.0
    assert c["hover_click_ratio"] == 16 / 4


def test_empty_log_counts():
    assert all(v == 0 for v in interaction_counts([]).values())


@st.composite
def logs(draw):
    out = []
    for k in range(draw(st.integers(0, 6))):
        counts = draw(st.lists(st.integers(1, 4), min_size=1, max_size=4))
        cells = [(r, c) for r, n in enumerate(counts) for c in range(n)]
        out.append(make_session(counts, draw(st.lists(st.sampled_from(cells), max_size=6)), sid=f"s{k}"))
    return out


@given(logs(), st.integers(0, 6))
def test_fractions_and_additivity(sessions, cut):
    hist = transition_distance_histogram(sessions)
    if hist:
        assert sum(hist.values()) == pytest.approx(1.0)
    st_ = direction_stats(sessions)
    if not st_.empty:
        assert st_.down_fraction + st_.up_fraction == pytest.approx(1.0)
    a, b = direction_stats(sessions[:cut]), direction_stats(sessions[cut:])
    assert (a.down + b.down, a.up + b.up, a.same_row + b.same_row) == (st_.down, st_.up, st_.same_row)
    ca, cb, c = interaction_counts(sessions[:cut]), interaction_counts(sessions[cut:]), interaction_counts(sessions)
    for key in ("sessions", "clicks", "hovers", "click_sessions", "hover_sessions"):
        assert ca[key] + cb[key] == c[key] >= 0
