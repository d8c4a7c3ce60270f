import pytest

from gubm.grid import EventKind, GridLayout, GridPosition, InteractionEvent, Session


def make_session(row_counts, cells=(), query="q", sid="s", kinds=None):
    """Session with one image per cell named ``<query>-r<row>c<col>``."""
    layout = GridLayout(tuple(row_counts))
    images = tuple(tuple(f"{query}-r{r}c{c}" for c in range(n)) for r, n in enumerate(row_counts))
    kinds = kinds or [EventKind.HOVER] * len(cells)
    events = tuple(
        InteractionEvent(100 * (k + 1), kind, GridPosition(*pos)) for k, (pos, kind) in enumerate(zip(cells, kinds))
    )
    return Session(sid, query, layout, images, events)


@pytest.fixture
def session_factory():
    return make_session


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        # one line per criterion, in criterion order
        for line in sorted(ACCEPTANCE_LINES, key=lambda ln: int(ln.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
