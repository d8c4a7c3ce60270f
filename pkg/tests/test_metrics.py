import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import entropy

from gubm.inference import EPS, ParameterStore, gamma_key
from gubm.metrics import (
    AnnotationRecord, dcg, evaluate_ndcg, gubm_predict_q, has_gain, merge_relevance, ndcg, perplexity,
    perplexity_improvement, rerank,
)
from gubm.path import LTOR, ZSHAPE

from conftest import make_session


@pytest.mark.parametrize("topical,quality,merged", [(0, 4, 0), (1, 3, 1), (2, 3, 3)])
def test_merge_examples(topical, quality, merged):
    assert merge_relevance(topical, quality) == merged


def test_merge_total_over_domain():
    for t, g in itertools.product(range(3), range(5)):
        expected = g if t == 2 else t
        assert merge_relevance(t, g) == expected
    for bad in [(3, 0), (-1, 0), (0, 5)]:
        with pytest.raises(ValueError):
            merge_relevance(*bad)
    with pytest.raises(ValueError):
        AnnotationRecord("q", "u", 2, 7)


def sessions_with(labels_per_session, width):
    out = []
    for k, labels in enumerate(labels_per_session):
        cells = [(0, c) for c in range(width) if labels[c]]
        out.append(make_session([width], cells, sid=f"s{k}"))
    return out


def test_constant_half_is_exactly_two():
    rng = np.random.default_rng(0)
    sess = sessions_with(rng.random((50, 6)) < 0.3, 6)
    report = perplexity(sess, lambda s: np.full(s.layout.total, 0.5))
    assert report.per_rank == [2.0] * 6
    assert report.overall == 2.0
    assert report.counts == [50] * 6


def test_rate_matched_predictor_gives_entropy_exponent():
    # exactly 10% of sessions interact at each rank
    labels = [[k % 10 == 0] * 3 for k in range(100)]
    report = perplexity(sessions_with(labels, 3), lambda s: np.full(3, 0.1))
    h = entropy([0.1, 0.9], base=2)
    assert h == pytest.approx(0.468996, abs=1e-6)
    for p in report.per_rank:
        assert p == pytest.approx(2 ** h, rel=1e-12)
        assert p == pytest.approx(1.3842, abs=1e-4)


def test_perfect_predictor_gives_one():
    labels = [[1, 0, 1], [0, 0, 1]]
    sess = sessions_with(labels, 3)
    lookup = {s.session_id: np.array(lab, dtype=float) for s, lab in zip(sess, labels)}
    report = perplexity(sess, lambda s: lookup[s.session_id])
    assert all(p == pytest.approx(1.0, abs=1e-5) and p >= 1.0 for p in report.per_rank)


@given(st.lists(st.lists(st.booleans(), min_size=4, max_size=4), min_size=1, max_size=8),
       st.lists(st.floats(0, 1), min_size=4, max_size=4))
def test_perplexity_at_least_one(labels, q):
    report = perplexity(sessions_with(labels, 4), lambda s: np.array(q))
    assert all(p >= 1.0 - 1e-12 for p in report.per_rank)


def test_ranks_averaged_over_sessions_that_reach_them():
    sess = [make_session([2], sid="a"), make_session([4], sid="b")]
    report = perplexity(sess, lambda s: np.full(s.layout.total, 0.5))
    assert report.counts == [2, 2, 1, 1]


def test_bad_predictor_output():
    s = make_session([3])
    with pytest.raises(ValueError, match="shape"):
        perplexity([s], lambda s: np.zeros(2))
    with pytest.raises(FloatingPointError):
        perplexity([s], lambda s: np.full(3, np.nan))


def test_improvement_reproduces_reported_figure():
    assert perplexity_improvement(1.101, 1.5806) == pytest.approx(0.826, abs=0.001)


def test_gubm_q_interior_and_endpoint():
    # single row of five, one interaction at column 2
    s = make_session([5], [(0, 2)])
    store = ParameterStore(
        alpha={("q", "q-r0c1"): 0.8, ("q", "q-r0c2"): 0.6},
        gamma={gamma_key("direction", 1, -1, 2): 0.5, gamma_key("direction", 2, -1, 2): 0.7},
    )
    q = gubm_predict_q(s, store, LTOR)
    assert q[1] == pytest.approx(0.4)
    assert q[2] == pytest.approx(0.42)
    # after the last signal every cell lies on the path to the virtual end
    assert q[3] == pytest.approx(0.25)


def test_gubm_q_clamped():
    s = make_session([2], [(0, 0)])
    q = gubm_predict_q(s, ParameterStore(alpha={("q", "q-r0c1"): 0.0}), ZSHAPE)
    assert q[1] == EPS


def test_gubm_q_combines_overlapping_paths():
    # rank 2 lies on 0 -> 3, on 3 -> 1 and on 1 -> virtual end
    s = make_session([4], [(0, 0), (0, 3), (0, 1)])
    q = gubm_predict_q(s, ParameterStore(), LTOR)
    assert q[2] == pytest.approx(1 - 0.75 ** 3)
    assert q[0] == pytest.approx(0.25)


def test_dcg_examples():
    assert dcg([3, 2, 1], 3) == pytest.approx(4.76186, abs=1e-5)
    assert ndcg([3, 2, 1], 3) == 1.0
    assert dcg([1, 2, 3], 3) == pytest.approx(3.76186, abs=1e-5)
    assert ndcg([1, 2, 3], 3) == pytest.approx(3.76186 / 4.76186, abs=1e-5)
    assert dcg([3], 5) == 3 and ndcg([3], 5) == 1.0
    with pytest.raises(ValueError):
        dcg([1], 0)


def test_ideal_is_best_permutation():
    scores = [1, 2, 3]
    best = max(dcg(list(p), 3) for p in itertools.permutations(scores))
    assert best == pytest.approx(dcg(sorted(scores, reverse=True), 3))


def test_zero_gain():
    assert ndcg([0, 0, 0], 3) == 0.0
    assert not has_gain([0, 0]) and has_gain([0, 1])


rel_lists = st.lists(st.integers(0, 4), min_size=1, max_size=12)


@given(rel_lists, st.integers(1, 15))
def test_ndcg_bounds(scores, depth):
    v = ndcg(scores, depth)
    assert 0.0 <= v <= 1.0 + 1e-12
    assert ndcg(sorted(scores, reverse=True), depth) == (1.0 if has_gain(scores) else 0.0)


@given(rel_lists, st.data())
def test_promoting_lower_item_never_helps(scores, data):
    i = data.draw(st.integers(0, len(scores) - 1))
    j = data.draw(st.integers(0, len(scores) - 1))
    i, j = min(i, j), max(i, j)
    if scores[i] >= scores[j]:
        swapped = list(scores)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        assert dcg(swapped, len(scores)) <= dcg(scores, len(scores)) + 1e-12


def test_rerank_examples():
    store = ParameterStore(alpha={("q", "a"): 0.9, ("q", "b"): 0.3, ("q", "c"): 0.6})
    assert rerank("q", ["a", "b", "c"], store) == ["a", "c", "b"]
    flat = ParameterStore(alpha={("q", u): 0.4 for u in "xyz"})
    assert rerank("q", ["z", "x", "y"], flat) == ["z", "x", "y"]


def test_rerank_unseen_uses_default():
    store = ParameterStore(alpha={("q", "a"): 0.7, ("q", "b"): 0.5, ("q", "c"): 0.2})
    cands = ["c", "new", "b", "a"]
    got = rerank("q", cands, store)

    def worse(u, v):
        # u ranks after v when strictly less relevant, or tied and later in the input
        au, av = store.alpha_of("q", u), store.alpha_of("q", v)
        return au < av or (au == av and cands.index(u) > cands.index(v))

    assert all(not worse(got[k], got[k + 1]) for k in range(len(got) - 1))
    assert got == ["a", "new", "b", "c"]


def test_true_alpha_ranking_is_perfect():
    rng = np.random.default_rng(4)
    alpha = {("q", f"u{k}"): float(a) for k, a in enumerate(rng.random(30))}
    rel = {key: min(int(a * 5), 4) for key, a in alpha.items()}
    rows = evaluate_ndcg({"q": [u for _, u in alpha]}, rel, ParameterStore(alpha=alpha), [5, 10, 20])
    assert rows["q"]["ndcg@5"] == rows["q"]["ndcg@10"] == rows["q"]["ndcg@20"] == pytest.approx(1.0)
    assert rows["q"]["zero_gain"] == 0.0


def test_evaluate_ndcg_skips_unannotated():
    rows = evaluate_ndcg({"q": ["a", "b"], "r": ["c"]}, {("q", "b"): 0, ("q", "a"): 0}, ParameterStore(), [5])
    assert list(rows) == ["q"]
    assert rows["q"] == {"ndcg@5": 0.0, "original_ndcg@5": 0.0, "zero_gain": 1.0}
