"""User browsing model baseline on a linearized grid.

The grid is flattened with a direction policy (Z-shape by default) and
treated as a ranked list.  Examination of rank r depends on r and the
distance to the nearest interacted rank above it; interactions are taken in
rank order, so revisits cannot be expressed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .grid import Session, truncate_session
from .inference import EPS, EmConfig, OccurrenceTable, _open, read_table, resolve_n_jobs, run_em, write_table, format_value
from .path import DirectionPolicy, LTOR, ZSHAPE, _tables
from .validation import check_policy, check_sessions

logger = logging.getLogger(__name__)


@dataclass
class UbmParameters:
    alpha: dict[tuple[str, str], float] = field(default_factory=dict)
    gamma: dict[tuple[int, int], float] = field(default_factory=dict)
    default_value: float = 0.5
    meta: dict[str, str] = field(default_factory=dict)

    def alpha_of(self, query_id: str, image_id: str) -> float:
        return self.alpha.get((query_id, image_id), self.default_value)

    def gamma_of(self, rank: int, distance: int) -> float:
        return self.gamma.get((rank, distance), self.default_value)


def _ubm_observations(session: Session, policy: DirectionPolicy) -> Iterator[tuple[str, int, int, bool]]:
    """(image id, rank, distance, interacted) for every rank of the session."""
    index, cells = _tables(session.layout.row_counts, policy)
    clicked = {index[r][c] for r, c in session.interacted_positions()}
    last = -1
    for rank, (r, c) in enumerate(cells):
        hit = rank in clicked
        yield session.images[r][c], rank, rank - last, hit
        if hit:
            last = rank


def ubm_fit(
    sessions: Iterable[Session],
    config: EmConfig | None = None,
    policy: DirectionPolicy = ZSHAPE,
    *,
    include_empty: bool = True,
    n_jobs: int = 1,
) -> tuple[UbmParameters, list[float]]:
    config = config or EmConfig()

    def keyed():
        for s in sessions:
            s, _ = truncate_session(s, config.truncation)
            if not include_empty and not s.events:
                continue
            for image, rank, dist, hit in _ubm_observations(s, policy):
                yield (s.query_id, image), (rank, dist), hit

    table = OccurrenceTable.from_keyed(keyed())
    alpha, gamma, history = run_em(table, config, n_jobs)
    params = UbmParameters(
        alpha=dict(zip(table.alpha_keys, alpha.tolist())),
        gamma=dict(zip(table.gamma_keys, gamma.tolist())),
        default_value=config.init_value,
        meta={
            "model": "ubm",
            "policy": policy.name,
            "truncation": str(config.truncation),
            "iterations": str(len(history) - 1),
        },
    )
    return params, history


def ubm_predict_q(session: Session, params: UbmParameters, policy: DirectionPolicy = ZSHAPE) -> np.ndarray:
    """Interaction probability per page-order (left-to-right) rank, given earlier interactions."""
    index, cells = _tables(session.layout.row_counts, policy)
    page_index = _tables(session.layout.row_counts, LTOR)[0]
    q = np.empty(session.layout.total)
    for image, rank, dist, _ in _ubm_observations(session, policy):
        r, c = cells[rank]
        q[page_index[r][c]] = params.alpha_of(session.query_id, image) * params.gamma_of(rank, dist)
    return np.clip(q, EPS, 1.0 - EPS)


def save_ubm_params(params: UbmParameters, path_or_file) -> None:
    rows = [("A", k, v) for k, v in params.alpha.items()]
    rows += [("GU", k, v) for k, v in params.gamma.items()]
    meta = dict(params.meta)
    meta["default_value"] = format_value(params.default_value)
    fh = _open(path_or_file, "w")
    try:
        write_table(fh, meta, rows)
    finally:
        if fh is not path_or_file:
            fh.close()


def load_ubm_params(path_or_file) -> UbmParameters:
    fh = _open(path_or_file, "r")
    try:
        meta, rows = read_table(fh)
    finally:
        if fh is not path_or_file:
            fh.close()
    params = UbmParameters(default_value=float(meta.pop("default_value", "0.5")), meta=meta)
    for kind, fields, value in rows:
        if kind == "A":
            params.alpha[(fields[0], fields[1])] = value
        elif kind == "GU":
            params.gamma[(int(fields[0]), int(fields[1]))] = value
        else:
            raise ValueError(f"unknown parameter kind {kind!r} in a UBM parameter file")
    return params


class UBM(BaseEstimator):
    """User browsing model fitted by EM on the linearized grid."""

    def __init__(self, direction="zshape", iterations=40, init_value=0.5, truncation=100,
                 convergence_epsilon=None, include_empty=True, n_jobs=1):
        self.direction = direction
        self.iterations = iterations
        self.init_value = init_value
        self.truncation = truncation
        self.convergence_epsilon = convergence_epsilon
        self.include_empty = include_empty
        self.n_jobs = n_jobs

    def _config(self):
        return EmConfig(self.iterations, self.init_value, self.truncation, self.convergence_epsilon)

    def fit(self, X, y=None):
        sessions = check_sessions(X)
        self.policy_ = check_policy(self.direction)
        self.params_, self.loglik_history_ = ubm_fit(
            sessions, self._config(), self.policy_,
            include_empty=self.include_empty, n_jobs=resolve_n_jobs(self.n_jobs),
        )
        self.n_iter_ = len(self.loglik_history_) - 1
        return self

    @classmethod
    def from_params(cls, params: UbmParameters) -> UBM:
        trunc = params.meta.get("truncation", "100")
        model = cls(direction=params.meta.get("policy", "zshape"),
                    truncation=None if trunc == "None" else int(trunc))
        model.policy_ = check_policy(model.direction)
        model.params_ = params
        return model

    def predict_interaction_proba(self, session: Session) -> np.ndarray:
        check_is_fitted(self, "params_")
        session, _ = truncate_session(session, self.truncation)
        return ubm_predict_q(session, self.params_, self.policy_)

    def predict_proba(self, X) -> list[np.ndarray]:
        return [self.predict_interaction_proba(s) for s in check_sessions(X)]

    def relevance(self, query_id: str, image_id: str) -> float:
        check_is_fitted(self, "params_")
        return self.params_.alpha_of(query_id, image_id)

    def save(self, path_or_file) -> None:
        check_is_fitted(self, "params_")
        save_ubm_params(self.params_, path_or_file)
