"""Grid result pages, interaction events and sessions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence


class GridPosition(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class GridLayout:
    """Number of images in each row of a result page."""

    row_counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.row_counts)
        if not counts:
            raise ValueError("layout needs at least one row")
        if any(c < 1 for c in counts):
            raise ValueError(f"row counts must be >= 1, got {counts}")
        object.__setattr__(self, "row_counts", counts)

    @property
    def num_rows(self) -> int:
        return len(self.row_counts)

    @property
    def total(self) -> int:
        return sum(self.row_counts)

    @property
    def last_position(self) -> GridPosition:
        return GridPosition(self.num_rows - 1, self.row_counts[-1] - 1)

    def contains(self, pos: GridPosition) -> bool:
        row, col = pos
        return 0 <= row < self.num_rows and 0 <= col < self.row_counts[row]

    def check_position(self, pos: GridPosition) -> GridPosition:
        if not self.contains(pos):
            raise ValueError(f"position {tuple(pos)} outside layout {self.row_counts}")
        return GridPosition(*pos)

    def positions(self):
        """Cells in page (row-major, left-to-right) order."""
        for r, n in enumerate(self.row_counts):
            for c in range(n):
                yield GridPosition(r, c)

    def truncate(self, k: int | None) -> GridLayout:
        """Keep the first ``k`` cells in page order."""
        if k is None or k >= self.total:
            return self
        if k < 1:
            raise ValueError("truncation must keep at least one cell")
        counts = []
        left = k
        for n in self.row_counts:
            if left <= 0:
                break
            counts.append(min(n, left))
            left -= n
        return GridLayout(tuple(counts))


class EventKind(enum.Enum):
    CLICK = "click"
    HOVER = "hover"


@dataclass(frozen=True)
class InteractionEvent:
    timestamp: int
    kind: EventKind
    position: GridPosition
    # hover dwell in ms when the log records it
    dwell_ms: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", GridPosition(*self.position))
        if not isinstance(self.kind, EventKind):
            object.__setattr__(self, "kind", EventKind(self.kind))


@dataclass(frozen=True)
class Session:
    """One query session on a grid page.

    ``images`` holds image ids row by row and must match ``layout``.
    """

    session_id: str
    query_id: str
    layout: GridLayout
    images: tuple[tuple[str, ...], ...]
    events: tuple[InteractionEvent, ...] = field(default=())

    def __post_init__(self):
        images = tuple(tuple(str(x) for x in row) for row in self.images)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "events", tuple(self.events))
        if tuple(len(r) for r in images) != self.layout.row_counts:
            raise ValueError(
                f"session {self.session_id}: image grid shape "
                f"{[len(r) for r in images]} does not match layout {list(self.layout.row_counts)}"
            )
        last = None
        for k, ev in enumerate(self.events):
            if not self.layout.contains(ev.position):
                raise ValueError(
                    f"session {self.session_id}: event {k} at {tuple(ev.position)} "
                    f"outside layout {list(self.layout.row_counts)}"
                )
            if last is not None and ev.timestamp < last:
                raise ValueError(f"session {self.session_id}: event {k} timestamp goes backwards")
            last = ev.timestamp

    def image_at(self, pos: GridPosition) -> str:
        return self.images[pos[0]][pos[1]]

    def interacted_positions(self) -> set[GridPosition]:
        return {ev.position for ev in self.events}

    def with_events(self, events: Sequence[InteractionEvent]) -> Session:
        return Session(self.session_id, self.query_id, self.layout, self.images, tuple(events))


def truncate_session(session: Session, k: int | None) -> tuple[Session, int]:
    """Restrict a session to the first ``k`` cells; returns it with the dropped-event count."""
    layout = session.layout.truncate(k)
    if layout is session.layout:
        return session, 0
    images = tuple(session.images[r][:n] for r, n in enumerate(layout.row_counts))
    kept = tuple(ev for ev in session.events if layout.contains(ev.position))
    dropped = len(session.events) - len(kept)
    return Session(session.session_id, session.query_id, layout, images, kept), dropped


def build_sequence(session: Session) -> tuple[GridPosition, ...]:
    """Interaction signals with the virtual start (0, 0) and virtual end prepended/appended.

    Consecutive events on the same cell (e.g. hover then click) collapse into one signal.
    """
    signals = [GridPosition(0, 0)]
    prev = None
    for k, ev in enumerate(session.events):
        if not session.layout.contains(ev.position):
            raise ValueError(f"session {session.session_id}: event {k} at {tuple(ev.position)} outside layout")
        if ev.position != prev:
            signals.append(ev.position)
        prev = ev.position
    signals.append(session.layout.last_position)
    return tuple(signals)


def transition_distance(a: GridPosition, b: GridPosition) -> int:
    return max(abs(b[0] - a[0]), abs(b[1] - a[1]))
