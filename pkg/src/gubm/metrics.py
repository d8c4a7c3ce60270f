"""Perplexity, NDCG and the annotation merge rule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import Session, truncate_session
from .inference import EPS, ParameterStore, _session_occurrences
from .path import DirectionPolicy, LTOR, ZSHAPE, _tables


@dataclass(frozen=True)
class AnnotationRecord:
    query_id: str
    image_id: str
    topical: int
    quality: int

    def __post_init__(self):
        merge_relevance(self.topical, self.quality)

    @property
    def relevance(self) -> int:
        return merge_relevance(self.topical, self.quality)


def merge_relevance(topical: int, quality: int) -> int:
    """Five-level score: topical relevance if it is 0 or 1, image quality if topical is 2."""
    if topical not in (0, 1, 2):
        raise ValueError(f"topical relevance {topical!r} outside 0..2")
    if quality not in (0, 1, 2, 3, 4):
        raise ValueError(f"image quality {quality!r} outside 0..4")
    return quality if topical == 2 else topical


@dataclass
class PerplexityReport:
    per_rank: list[float]
    counts: list[int] = field(default_factory=list)

    @property
    def overall(self) -> float:
        return float(np.mean(self.per_rank)) if self.per_rank else float("nan")


def interaction_labels(session: Session) -> np.ndarray:
    """0/1 interaction flag per page-order rank."""
    index = _tables(session.layout.row_counts, LTOR)[0]
    labels = np.zeros(session.layout.total, dtype=bool)
    for r, c in session.interacted_positions():
        labels[index[r][c]] = True
    return labels


def perplexity(
    sessions: Iterable[Session],
    predictor: Callable[[Session], np.ndarray],
    *,
    truncation: int | None = 100,
) -> PerplexityReport:
    """Per-rank interaction perplexity with ranks in page (left-to-right) order.

    ``predictor`` maps a session to interaction probabilities per rank.  A rank
    is averaged over the sessions whose page reaches it.
    """
    log_sums: list[float] = []
    counts: list[int] = []
    for s in sessions:
        s, _ = truncate_session(s, truncation)
        q = np.clip(np.asarray(predictor(s), dtype=float), EPS, 1.0 - EPS)
        if q.shape != (s.layout.total,):
            raise ValueError(f"predictor returned shape {q.shape}, expected ({s.layout.total},)")
        if not np.all(np.isfinite(q)):
            raise FloatingPointError(f"non-finite interaction probability for session {s.session_id}")
        labels = interaction_labels(s)
        ll = np.where(labels, np.log2(q), np.log2(1.0 - q))
        if len(ll) > len(log_sums):
            log_sums.extend([0.0] * (len(ll) - len(log_sums)))
            counts.extend([0] * (len(ll) - len(counts)))
        for r, v in enumerate(ll):
            log_sums[r] += v
            counts[r] += 1
    per_rank = [2.0 ** (-ls / n) for ls, n in zip(log_sums, counts)]
    return PerplexityReport(per_rank, counts)


def perplexity_improvement(p_a: float, p_b: float) -> float:
    """Improvement of perplexity ``p_a`` over ``p_b``."""
    return (p_b - p_a) / (p_b - 1.0)


def gubm_predict_q(session: Session, params: ParameterStore, policy: DirectionPolicy = ZSHAPE) -> np.ndarray:
    """Interaction probability per page-order rank, conditioned on the observed signal pairs.

    A rank on a path between adjacent signals (m, n) gets ``alpha * gamma[i, m, n]``;
    a rank covered by several paths combines them as the chance of at least one
    interaction.  Ranks on no path get the floor probability.
    """
    cells = _tables(session.layout.row_counts, policy)[1]
    page_index = _tables(session.layout.row_counts, LTOR)[0]
    miss = np.ones(session.layout.total)
    covered = np.zeros(session.layout.total, dtype=bool)
    for o in _session_occurrences(session, policy):
        r, c = cells[o.i]
        k = page_index[r][c]
        miss[k] *= 1.0 - params.alpha_of(o.query_id, o.image_id) * params.gamma_of(o.i, o.m, o.n)
        covered[k] = True
    q = np.where(covered, 1.0 - miss, EPS)
    return np.clip(q, EPS, 1.0 - EPS)


def dcg(scores: Sequence[float], depth: int) -> float:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return sum(r / math.log2(i + 2) for i, r in enumerate(scores[:depth]))


def ndcg(scores: Sequence[float], depth: int) -> float:
    """DCG over the ideal DCG; 0.0 when every score is zero (see :func:`has_gain`)."""
    ideal = dcg(sorted(scores, reverse=True), depth)
    if ideal <= 0:
        return 0.0
    return dcg(list(scores), depth) / ideal


def has_gain(scores: Sequence[float]) -> bool:
    return any(s > 0 for s in scores)


def rerank(query_id: str, candidates: Sequence[str], params) -> list[str]:
    """Sort candidates by estimated relevance, keeping the original order on ties."""
    return sorted(candidates, key=lambda u: -params.alpha_of(query_id, u))


def original_rankings(sessions: Iterable[Session]) -> dict[str, list[str]]:
    """Page-order image list per query, taken from the first session of each query."""
    out: dict[str, list[str]] = {}
    for s in sessions:
        if s.query_id not in out:
            out[s.query_id] = [img for row in s.images for img in row]
    return out


def resolve_annotations(records: Iterable[AnnotationRecord]) -> dict[tuple[str, str], int]:
    return {(r.query_id, r.image_id): r.relevance for r in records}


def evaluate_ndcg(
    rankings: dict[str, list[str]],
    relevance: dict[tuple[str, str], int],
    params,
    depths: Sequence[int] = (5, 10, 15, 20),
) -> dict[str, dict[str, float]]:
    """NDCG of the reranked and original lists for every query with annotations.

    Only annotated images take part.  Each row also carries ``zero_gain`` (1.0
    when no annotated image has positive relevance).
    """
    out = {}
    for q in sorted(rankings):
        cands = [u for u in rankings[q] if (q, u) in relevance]
        if not cands:
            continue
        reranked = rerank(q, cands, params)
        gains = [relevance[(q, u)] for u in reranked]
        base = [relevance[(q, u)] for u in cands]
        row = {}
        for d in depths:
            row[f"ndcg@{d}"] = ndcg(gains, d)
            row[f"original_ndcg@{d}"] = ndcg(base, d)
        row["zero_gain"] = 0.0 if has_gain(gains) else 1.0
        out[q] = row
    return out
