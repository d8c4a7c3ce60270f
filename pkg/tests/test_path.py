import itertools
import random

import pytest
from hypothesis import given, strategies as st

from gubm.grid import GridLayout, GridPosition, build_sequence
from gubm.path import LTOR, RTOL, ZSHAPE, DirectionPolicy, build_path, delinearize, linearize, session_paths

from conftest import make_session

POLICIES = [LTOR, RTOL, ZSHAPE, DirectionPolicy(ZSHAPE.variant, first_row_ltr=False)]
L45 = GridLayout((4, 5))


def scan_order(layout, policy):
    """Brute force: read the page row by row, each row in its own direction."""
    out = []
    for r, n in enumerate(layout.row_counts):
        cols = range(n) if policy.left_to_right(r) else range(n - 1, -1, -1)
        out.extend(GridPosition(r, c) for c in cols)
    return out


@pytest.mark.parametrize("policy,expected", [(LTOR, 6), (RTOL, 6), (ZSHAPE, 6)])
def test_linearize_examples(policy, expected):
    assert linearize(L45, GridPosition(1, 2), policy) == expected


def test_zshape_second_row_scans_right_to_left():
    assert linearize(L45, GridPosition(1, 0), ZSHAPE) == 8
    assert scan_order(L45, ZSHAPE).index((1, 0)) == 8


def test_delinearize_examples():
    assert delinearize(L45, 6, LTOR) == (1, 2)
    assert delinearize(L45, 0, LTOR) == (0, 0)
    assert delinearize(L45, 8, ZSHAPE) == (1, 0)


def test_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        linearize(L45, GridPosition(0, 4))
    with pytest.raises(ValueError):
        delinearize(L45, 9)
    with pytest.raises(ValueError):
        DirectionPolicy.parse("diagonal")


def test_parse_policy_names():
    assert DirectionPolicy.parse("Z-shape") == ZSHAPE
    assert DirectionPolicy.parse("LtoR") == LTOR


def test_build_path_examples():
    p = build_path(L45, GridPosition(0, 0), GridPosition(0, 3), LTOR)
    assert p.positions == ((0, 0), (0, 1), (0, 2), (0, 3))
    single = build_path(L45, GridPosition(1, 1), GridPosition(1, 1), ZSHAPE)
    assert len(single) == 1 and single.downward
    z = build_path(L45, GridPosition(0, 3), GridPosition(1, 1), ZSHAPE)
    assert z.positions == ((0, 3), (1, 4), (1, 3), (1, 2), (1, 1))


def test_upward_path():
    p = build_path(L45, GridPosition(1, 1), GridPosition(0, 3), ZSHAPE)
    assert not p.downward
    assert list(p.indices) == [7, 6, 5, 4, 3]


def random_layouts(n, seed=0):
    rng = random.Random(seed)
    for _ in range(n):
        yield GridLayout(tuple(rng.randint(1, 7) for _ in range(rng.randint(1, 8))))


@pytest.mark.parametrize("policy", POLICIES, ids=lambda p: f"{p.name}-{p.first_row_ltr}")
def test_linearize_matches_scan_order_and_is_bijective(policy):
    for layout in random_layouts(200):
        order = scan_order(layout, policy)
        assert [delinearize(layout, k, policy) for k in range(layout.total)] == order
        assert sorted(linearize(layout, p, policy) for p in layout.positions()) == list(range(layout.total))


@st.composite
def layout_and_cells(draw):
    counts = draw(st.lists(st.integers(1, 6), min_size=1, max_size=6))
    cells = [(r, c) for r, n in enumerate(counts) for c in range(n)]
    a = draw(st.sampled_from(cells))
    b = draw(st.sampled_from(cells))
    policy = draw(st.sampled_from(POLICIES))
    return GridLayout(tuple(counts)), GridPosition(*a), GridPosition(*b), policy


@given(layout_and_cells())
def test_path_properties(args):
    layout, a, b, policy = args
    p = build_path(layout, a, b, policy)
    q = build_path(layout, b, a, policy)
    assert p.positions == tuple(reversed(q.positions))
    assert len(p) == abs(p.end_lin - p.start_lin) + 1
    idx = [linearize(layout, x, policy) for x in p.positions]
    assert idx == list(p.indices)
    assert p.positions[0] == a and p.positions[-1] == b
    assert delinearize(layout, p.start_lin, policy) == a and delinearize(layout, p.end_lin, policy) == b


@given(layout_and_cells())
def test_zshape_rows_monotone_and_alternating(args):
    layout, a, b, _ = args
    p = build_path(layout, a, b, ZSHAPE)
    rows = [list(g) for _, g in itertools.groupby(p.positions, key=lambda x: x.row)]
    steps = []
    for cells in rows:
        cols = [x.col for x in cells]
        diffs = {y - x for x, y in zip(cols, cols[1:])}
        assert diffs <= {1} or diffs <= {-1}
        if diffs:
            steps.append(diffs.pop())
    # orientation flips whenever the path enters the next row
    if p.downward:
        for r_cells in rows:
            r = r_cells[0].row
            if len(r_cells) > 1:
                assert (r_cells[1].col - r_cells[0].col == 1) == (r % 2 == 0)


def test_session_paths_use_virtual_endpoints():
    s = make_session([4, 5], [(0, 2)])
    paths = session_paths(s.layout, build_sequence(s), ZSHAPE)
    first, last = paths
    assert (first.start_lin, first.end_lin) == (-1, 2)
    assert first.positions == (None, (0, 0), (0, 1), (0, 2))
    assert first.virtual_start and not first.virtual_end
    assert (last.start_lin, last.end_lin) == (2, 9)
    assert last.positions[-1] is None and last.virtual_end
    # under Z-shape the whole last row, scanned right to left, lies on the end path
    assert set(last.positions[1:-1]) >= {(1, c) for c in range(5)}
