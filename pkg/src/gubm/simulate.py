"""Synthetic interaction logs drawn from known relevance parameters.

From the current interaction signal the simulated user picks a vertical
direction, then walks the linearized grid in that direction.  Each visited
cell is examined with a probability that decays with its distance from the
signal, and an examined cell is interacted with according to its true
relevance.  The first interaction becomes the next signal.  A walk that runs
off either end of the page ends the session.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from joblib import Parallel, delayed

from .grid import EventKind, GridLayout, GridPosition, InteractionEvent, Session
from .inference import ParameterStore
from .path import DirectionPolicy, _tables

DEFAULT_ALPHA_LEVELS = (0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95)


@dataclass
class SimConfig:
    num_queries: int = 20
    sessions_per_query: int = 100
    num_rows: int = 10
    min_width: int = 4
    max_width: int = 6
    # fixed layout for every query; drawn per query when None
    row_counts: tuple[int, ...] | None = None
    alpha_levels: tuple[float, ...] = DEFAULT_ALPHA_LEVELS
    # overrides for specific (query_id, image_id) pairs
    true_alpha: dict[tuple[str, str], float] = field(default_factory=dict)
    gamma_down_base: float = 1.0
    gamma_down_decay: float = 0.85
    gamma_up_base: float = 0.9
    gamma_up_decay: float = 0.85
    gamma_family: Callable[[int, bool], float] | None = None
    p_down: float = 0.681
    max_signals: int = 50
    click_prob: float = 0.15
    policy: str = "zshape"
    seed: int = 0

    def __post_init__(self):
        probs = [self.gamma_down_base, self.gamma_down_decay, self.gamma_up_base, self.gamma_up_decay,
                 self.p_down, self.click_prob, *self.alpha_levels, *self.true_alpha.values()]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("simulation probabilities must lie in [0, 1]")
        if not 1 <= self.min_width <= self.max_width:
            raise ValueError("need 1 <= min_width <= max_width")
        if self.num_rows < 1 or self.max_signals < 1:
            raise ValueError("num_rows and max_signals must be >= 1")
        if self.row_counts is not None:
            self.row_counts = tuple(self.row_counts)
        self.alpha_levels = tuple(self.alpha_levels)

    def examine_prob(self, offset: int, downward: bool) -> float:
        """Examination probability of a cell ``offset`` steps from the current signal."""
        if self.gamma_family is not None:
            return self.gamma_family(offset, downward)
        steps = max(offset - 1, 0)
        if downward:
            return self.gamma_down_base * self.gamma_down_decay ** steps
        return self.gamma_up_base * self.gamma_up_decay ** steps

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        data = dict(data)
        ta = data.pop("true_alpha", None) or {}
        if isinstance(ta, dict):
            # JSON form: {"query": {"image": alpha}}
            ta = {(q, u): a for q, imgs in ta.items() for u, a in imgs.items()}
        known = set(cls.__dataclass_fields__) - {"gamma_family", "true_alpha"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown simulation settings: {sorted(unknown)}")
        return cls(true_alpha=ta, **data)

    @classmethod
    def from_json(cls, path) -> SimConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("gamma_family")
        ta: dict = {}
        for (q, u), a in sorted(self.true_alpha.items()):
            ta.setdefault(q, {})[u] = a
        d["true_alpha"] = ta
        return d


@dataclass(frozen=True)
class SimQuery:
    query_id: str
    layout: GridLayout
    images: tuple[tuple[str, ...], ...]
    alpha: tuple[float, ...]  # per page-order cell


def make_queries(config: SimConfig) -> list[SimQuery]:
    queries = []
    for qi in range(config.num_queries):
        rng = np.random.default_rng([config.seed, qi, 0])
        if config.row_counts is not None:
            counts = config.row_counts
        else:
            counts = tuple(int(w) for w in rng.integers(config.min_width, config.max_width + 1, size=config.num_rows))
        layout = GridLayout(counts)
        qid = f"q{qi}"
        images, alpha = [], []
        k = 0
        for n in counts:
            row = []
            for _ in range(n):
                u = f"{qid}-img{k}"
                row.append(u)
                level = float(rng.choice(config.alpha_levels))
                alpha.append(config.true_alpha.get((qid, u), level))
                k += 1
            images.append(tuple(row))
        queries.append(SimQuery(qid, layout, tuple(images), tuple(alpha)))
    return queries


def simulate_session(config: SimConfig, query: SimQuery, rng: np.random.Generator, session_id: str = "s") -> Session:
    policy = DirectionPolicy.parse(config.policy)
    cells = _tables(query.layout.row_counts, policy)[1]
    page_index = _tables(query.layout.row_counts, DirectionPolicy.parse("ltor"))[0]
    total = query.layout.total
    m = -1  # virtual session start, just before the first scanned cell
    signals: list[int] = []
    while len(signals) < config.max_signals:
        # the first move from the session start is always downward
        down = m < 0 or rng.random() < config.p_down
        i = m
        nxt = None
        while True:
            i = i + 1 if down else i - 1
            if not 0 <= i < total:
                break
            r, c = cells[i]
            if rng.random() < config.examine_prob(abs(i - m), down) and rng.random() < query.alpha[page_index[r][c]]:
                nxt = i
                break
        if nxt is None:
            break
        signals.append(nxt)
        m = nxt
    events = []
    t = 0
    for k in signals:
        t += int(rng.integers(200, 3000))
        if rng.random() < config.click_prob:
            events.append(InteractionEvent(t, EventKind.CLICK, GridPosition(*cells[k])))
        else:
            dwell = int(rng.integers(100, 1500))
            events.append(InteractionEvent(t, EventKind.HOVER, GridPosition(*cells[k]), dwell))
    return Session(session_id, query.query_id, query.layout, query.images, tuple(events))


def _simulate_query(config: SimConfig, qi: int, query: SimQuery) -> list[Session]:
    out = []
    for si in range(config.sessions_per_query):
        rng = np.random.default_rng([config.seed, qi, 1, si])
        out.append(simulate_session(config, query, rng, f"{query.query_id}-s{si}"))
    return out


def simulate_log(config: SimConfig, n_jobs: int = 1) -> tuple[list[Session], list[SimQuery]]:
    """Simulate every query; the output does not depend on ``n_jobs``."""
    queries = make_queries(config)
    if n_jobs == 1:
        chunks = [_simulate_query(config, qi, q) for qi, q in enumerate(queries)]
    else:
        chunks = Parallel(n_jobs=n_jobs)(delayed(_simulate_query)(config, qi, q) for qi, q in enumerate(queries))
    return [s for chunk in chunks for s in chunk], queries


def truth_params(queries: list[SimQuery]) -> ParameterStore:
    """Ground-truth relevance as a parameter table (alpha entries only)."""
    alpha = {}
    for q in queries:
        flat = [u for row in q.images for u in row]
        for u, a in zip(flat, q.alpha):
            alpha[(q.query_id, u)] = a
    return ParameterStore(alpha=alpha, meta={"model": "truth"})
