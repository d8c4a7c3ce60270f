"""EM estimation of relevance (alpha) and examination (gamma) parameters.

Every adjacent pair of interaction signals (m, n) contributes one
*occurrence* per linearized position i on the path between them, excluding
the start m.  Position n is observed as interacted, the positions strictly
between were skipped.  Each occurrence is a Bernoulli observation of
``alpha[query, image_i] * gamma[key(i, m, n)]``, so the E-step posterior of
the two latent factors is closed-form and the M-step is a ratio of posterior
sums to occurrence counts.
"""

from __future__ import annotations

import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .grid import Session, build_sequence, truncate_session
from .path import DirectionPolicy, ImagePath, ZSHAPE, session_paths

logger = logging.getLogger(__name__)

EPS = 1e-6
FORMAT_VERSION = 1
# fixed shard size keeps floating-point reduction order independent of worker count
SHARD_SIZE = 1 << 18

GAMMA_TYINGS = ("direction", "distance", "path")


def gamma_key(tying: str, i: int, m: int, n: int) -> tuple:
    """Key of the examination parameter for position i on the path m -> n.

    ``path`` keeps the full (i, m, n) triple.  ``direction`` keeps (i, m) and
    only the vertical direction of n; ``distance`` keeps |i - m| and the
    direction.
    """
    if tying == "direction":
        return (i, m, "D" if m <= n else "U")
    if tying == "distance":
        return (abs(i - m), "D" if m <= n else "U")
    if tying == "path":
        return (i, m, n)
    raise ValueError(f"unknown gamma tying {tying!r}; expected one of {GAMMA_TYINGS}")


def _gamma_key_from_fields(tying: str, fields: list[str]) -> tuple:
    if tying == "direction":
        i, m, d = fields
        return (int(i), int(m), d)
    if tying == "distance":
        dist, d = fields
        return (int(dist), d)
    i, m, n = fields
    return (int(i), int(m), int(n))


@dataclass
class EmConfig:
    iterations: int = 40
    init_value: float = 0.5
    truncation: int | None = 100
    convergence_epsilon: float | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.init_value < 1.0:
            raise ValueError("init_value must lie strictly between 0 and 1")
        if self.truncation is not None and self.truncation < 1:
            raise ValueError("truncation must be >= 1")


@dataclass
class ParameterStore:
    """Sparse alpha/gamma tables; unseen keys read ``default_value``."""

    alpha: dict[tuple[str, str], float] = field(default_factory=dict)
    gamma: dict[tuple, float] = field(default_factory=dict)
    gamma_tying: str = "direction"
    default_value: float = 0.5
    meta: dict[str, str] = field(default_factory=dict)

    def alpha_of(self, query_id: str, image_id: str) -> float:
        return self.alpha.get((query_id, image_id), self.default_value)

    def gamma_of(self, i: int, m: int, n: int) -> float:
        if not min(m, n) <= i <= max(m, n):
            return 0.0
        return self.gamma.get(gamma_key(self.gamma_tying, i, m, n), self.default_value)


class Occurrence(NamedTuple):
    query_id: str
    image_id: str
    i: int
    m: int
    n: int
    is_endpoint: bool


def _session_occurrences(session: Session, policy: DirectionPolicy) -> Iterator[Occurrence]:
    q = session.query_id
    images = session.images
    for path in session_paths(session.layout, build_sequence(session), policy):
        m, n = path.start_lin, path.end_lin
        if m == n:
            if not path.virtual_end:
                r, c = path.positions[0]
                yield Occurrence(q, images[r][c], n, m, n, True)
            continue
        for i, pos in zip(path.indices[1:], path.positions[1:]):
            if i == n and path.virtual_end:
                break
            yield Occurrence(q, images[pos[0]][pos[1]], i, m, n, i == n)


def extract_occurrences(
    sessions: Iterable[Session],
    policy: DirectionPolicy = ZSHAPE,
    *,
    truncation: int | None = None,
    include_empty: bool = True,
) -> Iterator[Occurrence]:
    """Yield occurrences for every adjacent signal pair of every session."""
    for s in sessions:
        if truncation is not None:
            s, _ = truncate_session(s, truncation)
        if not include_empty and not s.events:
            continue
        yield from _session_occurrences(s, policy)


class OccurrenceTable:
    """Occurrences encoded as integer parameter indices for vectorized EM."""

    def __init__(self, alpha_keys, gamma_keys, alpha_idx, gamma_idx, observed):
        self.alpha_keys = alpha_keys
        self.gamma_keys = gamma_keys
        self.alpha_idx = alpha_idx
        self.gamma_idx = gamma_idx
        self.observed = observed

    def __len__(self):
        return len(self.observed)

    @classmethod
    def from_keyed(cls, items: Iterable[tuple[tuple, tuple, bool]]) -> OccurrenceTable:
        """Build from (alpha key, gamma key, observed) triples in a fixed order."""
        alpha_pos: dict = {}
        gamma_pos: dict = {}
        a_idx: list[int] = []
        g_idx: list[int] = []
        obs: list[bool] = []
        for ak, gk, o in items:
            a = alpha_pos.get(ak)
            if a is None:
                a = alpha_pos[ak] = len(alpha_pos)
            g = gamma_pos.get(gk)
            if g is None:
                g = gamma_pos[gk] = len(gamma_pos)
            a_idx.append(a)
            g_idx.append(g)
            obs.append(o)
        return cls(
            list(alpha_pos),
            list(gamma_pos),
            np.asarray(a_idx, dtype=np.int64),
            np.asarray(g_idx, dtype=np.int64),
            np.asarray(obs, dtype=bool),
        )

    @classmethod
    def from_occurrences(cls, occurrences: Iterable[Occurrence], gamma_tying: str = "direction") -> OccurrenceTable:
        gamma_key(gamma_tying, 0, 0, 0)  # validates the tying name
        return cls.from_keyed(
            ((o.query_id, o.image_id), gamma_key(gamma_tying, o.i, o.m, o.n), o.is_endpoint) for o in occurrences
        )


def posteriors(alpha: np.ndarray, gamma: np.ndarray, observed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior P(R=1) and P(E=1) of each occurrence given its interaction label.

    An interacted position was both examined and relevant; for a skipped one
    the joint (E, R) = (1, 1) is ruled out and the remaining mass is renormalized.
    """
    skip = 1.0 - alpha * gamma
    post_r = np.where(observed, 1.0, alpha * (1.0 - gamma) / skip)
    post_e = np.where(observed, 1.0, gamma * (1.0 - alpha) / skip)
    return post_r, post_e


def _shards(n: int):
    return [slice(lo, min(lo + SHARD_SIZE, n)) for lo in range(0, n, SHARD_SIZE)]


def _pairwise_sum(parts: list):
    while len(parts) > 1:
        nxt = [parts[k] + parts[k + 1] for k in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _map(fn, items, n_jobs: int):
    if n_jobs == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def resolve_n_jobs(n_jobs: int | None) -> int:
    if n_jobs is None or n_jobs <= 0:
        return os.cpu_count() or 1
    return n_jobs


def table_log_likelihood(table: OccurrenceTable, alpha: np.ndarray, gamma: np.ndarray, n_jobs: int = 1) -> float:
    def part(sl):
        p = alpha[table.alpha_idx[sl]] * gamma[table.gamma_idx[sl]]
        return float(np.sum(np.log(np.where(table.observed[sl], p, 1.0 - p))))

    return math.fsum(_map(part, _shards(len(table)), n_jobs))


def run_em(table: OccurrenceTable, config: EmConfig, n_jobs: int = 1):
    """Run EM on an occurrence table.

    Returns ``(alpha, gamma, history)`` where ``history`` holds the
    log-likelihood at the initial point and after every iteration.
    """
    if len(table) == 0:
        raise ValueError("no occurrences to fit; the log is empty after filtering")
    n_jobs = resolve_n_jobs(n_jobs)
    na, ng = len(table.alpha_keys), len(table.gamma_keys)
    alpha = np.full(na, config.init_value)
    gamma = np.full(ng, config.init_value)
    count_a = np.bincount(table.alpha_idx, minlength=na).astype(float)
    count_g = np.bincount(table.gamma_idx, minlength=ng).astype(float)
    shards = _shards(len(table))

    def estep(sl):
        ai = table.alpha_idx[sl]
        gi = table.gamma_idx[sl]
        obs = table.observed[sl]
        post_r, post_e = posteriors(alpha[ai], gamma[gi], obs)
        return (
            np.bincount(ai, weights=post_r, minlength=na),
            np.bincount(gi, weights=post_e, minlength=ng),
        )

    history = [table_log_likelihood(table, alpha, gamma, n_jobs)]
    for it in range(config.iterations):
        parts = _map(estep, shards, n_jobs)
        sum_a = _pairwise_sum([p[0] for p in parts])
        sum_g = _pairwise_sum([p[1] for p in parts])
        new_alpha = np.clip(sum_a / count_a, EPS, 1.0 - EPS)
        new_gamma = np.clip(sum_g / count_g, EPS, 1.0 - EPS)
        change = (np.abs(new_alpha - alpha).sum() + np.abs(new_gamma - gamma).sum()) / (na + ng)
        alpha, gamma = new_alpha, new_gamma
        history.append(table_log_likelihood(table, alpha, gamma, n_jobs))
        logger.debug("EM iteration %d: log-likelihood %.6f, mean change %.3g", it + 1, history[-1], change)
        if config.convergence_epsilon is not None and change < config.convergence_epsilon:
            logger.info("EM converged after %d iterations", it + 1)
            break
    return alpha, gamma, history


def fit_gubm(
    sessions: Iterable[Session],
    config: EmConfig | None = None,
    policy: DirectionPolicy = ZSHAPE,
    *,
    gamma_tying: str = "direction",
    include_empty: bool = True,
    n_jobs: int = 1,
) -> tuple[ParameterStore, list[float]]:
    config = config or EmConfig()
    dropped = 0

    def truncated():
        nonlocal dropped
        for s in sessions:
            t, d = truncate_session(s, config.truncation)
            dropped += d
            yield t

    occ = extract_occurrences(truncated(), policy, include_empty=include_empty)
    table = OccurrenceTable.from_occurrences(occ, gamma_tying)
    if dropped:
        logger.info("dropped %d interactions beyond the first %s positions", dropped, config.truncation)
    alpha, gamma, history = run_em(table, config, n_jobs)
    store = ParameterStore(
        alpha=dict(zip(table.alpha_keys, alpha.tolist())),
        gamma=dict(zip(table.gamma_keys, gamma.tolist())),
        gamma_tying=gamma_tying,
        default_value=config.init_value,
        meta={
            "model": "gubm",
            "policy": policy.name,
            "gamma_tying": gamma_tying,
            "truncation": str(config.truncation),
            "iterations": str(len(history) - 1),
            "dropped_events": str(dropped),
        },
    )
    return store, history


def em_fit(
    sessions: Iterable[Session],
    config: EmConfig | None = None,
    policy: DirectionPolicy = ZSHAPE,
    **kwargs,
) -> ParameterStore:
    """Fit alpha and gamma by EM; see :func:`fit_gubm` for the keyword options."""
    return fit_gubm(sessions, config, policy, **kwargs)[0]


def pair_likelihood(path: ImagePath, session: Session, params: ParameterStore) -> float:
    """Probability of skipping the path interior and interacting at its end.

    A path ending at the virtual session end has no interaction factor.
    """
    q = session.query_id
    m, n = path.start_lin, path.end_lin
    if m == n:
        if path.virtual_end:
            return 1.0
        return params.alpha_of(q, session.image_at(path.positions[0])) * params.gamma_of(n, m, n)
    p = 1.0
    for i, pos in zip(path.indices[1:], path.positions[1:]):
        if i == n and path.virtual_end:
            break
        ag = params.alpha_of(q, session.image_at(pos)) * params.gamma_of(i, m, n)
        p *= ag if i == n else 1.0 - ag
    return p


def log_likelihood(
    sessions: Iterable[Session],
    params: ParameterStore,
    policy: DirectionPolicy = ZSHAPE,
    *,
    truncation: int | None = None,
    include_empty: bool = True,
) -> float:
    total = []
    for o in extract_occurrences(sessions, policy, truncation=truncation, include_empty=include_empty):
        p = params.alpha_of(o.query_id, o.image_id) * params.gamma_of(o.i, o.m, o.n)
        total.append(math.log(p if o.is_endpoint else 1.0 - p))
    return math.fsum(total)


# -- parameter files --------------------------------------------------------


def _check_field(value: str) -> str:
    if any(ch in value for ch in "\t\n\r"):
        raise ValueError(f"identifier {value!r} contains a tab or newline")
    return value


def format_value(v: float) -> str:
    return f"{v:.9g}"


def write_table(fh, meta: dict[str, str], rows: Iterable[tuple[str, tuple, float]]) -> None:
    """Write a sorted parameter table.

    ``rows`` are ``(kind, key, value)``; lines are sorted by kind then key.
    """
    fh.write(f"# gubm-params {FORMAT_VERSION}\n")
    for k in sorted(meta):
        fh.write(f"# {k}={meta[k]}\n")
    for kind, key, value in sorted(rows, key=lambda r: (r[0], r[1])):
        fields = "\t".join(_check_field(str(x)) for x in key)
        fh.write(f"{kind}\t{fields}\t{format_value(value)}\n")


def read_table(fh) -> tuple[dict[str, str], list[tuple[str, list[str], float]]]:
    first = fh.readline().rstrip("\n")
    if first != f"# gubm-params {FORMAT_VERSION}":
        raise ValueError(f"not a version-{FORMAT_VERSION} parameter file (header {first!r})")
    meta: dict[str, str] = {}
    rows = []
    for lineno, line in enumerate(fh, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise ValueError(f"line {lineno}: malformed parameter line {line!r}")
        try:
            value = float(parts[-1])
        except ValueError:
            raise ValueError(f"line {lineno}: bad value {parts[-1]!r}") from None
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"line {lineno}: value {value} outside [0, 1]")
        rows.append((parts[0], parts[1:-1], value))
    return meta, rows


def _open(path_or_file, mode):
    if isinstance(path_or_file, (str, os.PathLike)):
        return open(path_or_file, mode, encoding="utf-8", newline="\n")
    return path_or_file


def save_params(params: ParameterStore, path_or_file) -> None:
    rows = [("A", k, v) for k, v in params.alpha.items()]
    rows += [("G", k, v) for k, v in params.gamma.items()]
    meta = dict(params.meta)
    meta["gamma_tying"] = params.gamma_tying
    meta["default_value"] = format_value(params.default_value)
    fh = _open(path_or_file, "w")
    try:
        write_table(fh, meta, rows)
    finally:
        if fh is not path_or_file:
            fh.close()


def load_params(path_or_file) -> ParameterStore:
    fh = _open(path_or_file, "r")
    try:
        meta, rows = read_table(fh)
    finally:
        if fh is not path_or_file:
            fh.close()
    tying = meta.pop("gamma_tying", "direction")
    default = float(meta.pop("default_value", "0.5"))
    store = ParameterStore(gamma_tying=tying, default_value=default, meta=meta)
    for kind, fields, value in rows:
        if kind == "A":
            if len(fields) != 2:
                raise ValueError(f"alpha line needs query and image ids, got {fields}")
            store.alpha[(fields[0], fields[1])] = value
        elif kind == "G":
            store.gamma[_gamma_key_from_fields(tying, fields)] = value
        else:
            raise ValueError(f"unknown parameter kind {kind!r} in a GUBM parameter file")
    return store


def dumps_params(params: ParameterStore) -> str:
    buf = io.StringIO()
    save_params(params, buf)
    return buf.getvalue()
