"""Scikit-learn style estimator for the grid-based user browsing model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .grid import Session, truncate_session
from .inference import EmConfig, ParameterStore, fit_gubm, log_likelihood, resolve_n_jobs, save_params
from .metrics import gubm_predict_q, rerank
from .validation import check_policy, check_probability, check_sessions


class GUBM(BaseEstimator):
    """Grid-based user browsing model.

    Parameters
    ----------
    direction : {"zshape", "ltor", "rtol"}
        In-row examination direction used to linearize the grid.
    iterations : int
        Number of EM rounds.
    init_value : float
        Starting value of every alpha and gamma.
    truncation : int or None
        Only the first ``truncation`` cells of each page are modelled.
    gamma_tying : {"direction", "distance", "path"}
        How examination parameters are shared; ``"path"`` keys them on the full
        (position, path start, path end) triple.
    convergence_epsilon : float or None
        Stop early once the mean absolute parameter change falls below it.
    include_empty : bool
        Whether sessions without interactions contribute skip evidence.
    n_jobs : int
        Worker threads for the E-step; results do not depend on it.
    """

    def __init__(self, direction="zshape", iterations=40, init_value=0.5, truncation=100,
                 gamma_tying="direction", convergence_epsilon=None, include_empty=True, n_jobs=1):
        self.direction = direction
        self.iterations = iterations
        self.init_value = init_value
        self.truncation = truncation
        self.gamma_tying = gamma_tying
        self.convergence_epsilon = convergence_epsilon
        self.include_empty = include_empty
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        sessions = check_sessions(X)
        check_probability(self.init_value, "init_value", open_interval=True)
        self.policy_ = check_policy(self.direction)
        config = EmConfig(self.iterations, self.init_value, self.truncation, self.convergence_epsilon)
        self.params_, self.loglik_history_ = fit_gubm(
            sessions, config, self.policy_,
            gamma_tying=self.gamma_tying, include_empty=self.include_empty,
            n_jobs=resolve_n_jobs(self.n_jobs),
        )
        self.n_iter_ = len(self.loglik_history_) - 1
        self.n_dropped_events_ = int(self.params_.meta["dropped_events"])
        return self

    @classmethod
    def from_params(cls, params: ParameterStore) -> GUBM:
        """Wrap a stored parameter table as a fitted model."""
        trunc = params.meta.get("truncation", "100")
        model = cls(direction=params.meta.get("policy", "zshape"),
                    truncation=None if trunc == "None" else int(trunc),
                    gamma_tying=params.gamma_tying, init_value=params.default_value)
        model.policy_ = check_policy(model.direction)
        model.params_ = params
        return model

    def predict_interaction_proba(self, session: Session) -> np.ndarray:
        check_is_fitted(self, "params_")
        session, _ = truncate_session(session, self.truncation)
        return gubm_predict_q(session, self.params_, self.policy_)

    def predict_proba(self, X) -> list[np.ndarray]:
        """Interaction probability per page-order rank for each session."""
        return [self.predict_interaction_proba(s) for s in check_sessions(X)]

    def score(self, X, y=None) -> float:
        """Log-likelihood of the sessions under the fitted parameters."""
        check_is_fitted(self, "params_")
        return log_likelihood(check_sessions(X), self.params_, self.policy_,
                              truncation=self.truncation, include_empty=self.include_empty)

    def relevance(self, query_id: str, image_id: str) -> float:
        check_is_fitted(self, "params_")
        return self.params_.alpha_of(query_id, image_id)

    def rerank(self, query_id: str, candidates) -> list[str]:
        check_is_fitted(self, "params_")
        return rerank(query_id, list(candidates), self.params_)

    def save(self, path_or_file) -> None:
        check_is_fitted(self, "params_")
        save_params(self.params_, path_or_file)
