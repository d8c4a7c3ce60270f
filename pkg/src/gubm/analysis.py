"""Descriptive statistics over interaction logs.

All measures use adjacent *interaction* signals (virtual start/end excluded),
not gaze fixations.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .grid import EventKind, Session, build_sequence, transition_distance


def _real_pairs(s: Session):
    seq = build_sequence(s)[1:-1]
    return zip(seq, seq[1:])


@dataclass
class DirectionStats:
    down: int
    up: int
    same_row: int

    @property
    def empty(self) -> bool:
        return self.down + self.up == 0

    @property
    def down_fraction(self) -> float:
        return self.down / (self.down + self.up) if not self.empty else float("nan")

    @property
    def up_fraction(self) -> float:
        return self.up / (self.down + self.up) if not self.empty else float("nan")


def direction_stats(sessions: Iterable[Session]) -> DirectionStats:
    down = up = same = 0
    for s in sessions:
        for a, b in _real_pairs(s):
            if b.row > a.row:
                down += 1
            elif b.row < a.row:
                up += 1
            else:
                same += 1
    return DirectionStats(down, up, same)


def transition_distance_histogram(sessions: Iterable[Session]) -> dict[int, float]:
    counts: Counter = Counter()
    for s in sessions:
        for a, b in _real_pairs(s):
            counts[transition_distance(a, b)] += 1
    total = sum(counts.values())
    return {d: counts[d] / total for d in sorted(counts)}


def interaction_counts(sessions: Iterable[Session]) -> dict[str, float]:
    n = click_sessions = hover_sessions = clicks = hovers = 0
    for s in sessions:
        n += 1
        c = sum(1 for ev in s.events if ev.kind is EventKind.CLICK)
        h = len(s.events) - c
        clicks += c
        hovers += h
        click_sessions += c > 0
        hover_sessions += h > 0
    return {
        "sessions": n,
        "click_sessions": click_sessions,
        "hover_sessions": hover_sessions,
        "clicks": clicks,
        "hovers": hovers,
        "click_session_fraction": click_sessions / n if n else 0.0,
        "hover_session_fraction": hover_sessions / n if n else 0.0,
        "hover_click_ratio": hovers / clicks if clicks else 0.0,
    }
