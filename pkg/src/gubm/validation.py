"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numbers

from .grid import Session
from .path import DirectionPolicy


def check_sessions(X, *, allow_empty: bool = False) -> list[Session]:
    """Return ``X`` as a list of sessions, rejecting anything else."""
    if isinstance(X, Session):
        X = [X]
    try:
        sessions = list(X)
    except TypeError:
        raise TypeError(f"expected an iterable of Session objects, got {type(X).__name__}") from None
    for k, s in enumerate(sessions):
        if not isinstance(s, Session):
            raise TypeError(f"item {k} is {type(s).__name__}, not a Session")
    if not sessions and not allow_empty:
        raise ValueError("no sessions given")
    return sessions


def check_probability(value, name: str, *, open_interval: bool = False) -> float:
    if not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number")
    value = float(value)
    ok = 0.0 < value < 1.0 if open_interval else 0.0 <= value <= 1.0
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise ValueError(f"{name}={value} outside {bounds}")
    return value


def check_policy(direction) -> DirectionPolicy:
    return DirectionPolicy.parse(direction)
