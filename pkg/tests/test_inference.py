from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import ra_bruteforce, random_graph

from rateprobe.graph import LocalGraph, Snapshot, probe_update
from rateprobe.inference import (Candidates, GrowthState, ResourceAllocationPredictor, estimate_organic_delta,
                                 infer_edges, ra_scores, realized_precision, sample_non_edges, update_growth)


def test_path_single_common_neighbour():
    g = Snapshot.from_edges([(0, 1), (1, 2)], 3)
    got = ra_scores(g, filter_min_out=0).as_dict()
    assert got[(0, 2)] == 0.5 and got[(2, 0)] == 0.5
    assert (0, 1) not in got


def test_no_common_neighbour_absent():
    g = Snapshot.from_edges([(0, 1), (2, 3)], 4)
    assert len(ra_scores(g, filter_min_out=0)) == 0


def test_filter_on_prospective_follower():
    g = Snapshot.from_edges([(0, 1), (1, 2), (0, 3)], 4)
    got = ra_scores(g, filter_min_out=2).as_dict()
    assert set(got) == {(0, 2)}


@given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.sampled_from([0, 1, 3, 5]))
def test_matches_bruteforce(seed, n, f):
    g = random_graph(np.random.default_rng(seed), n)
    want = ra_bruteforce(g, f)
    got = ra_scores(g, filter_min_out=f, chunk_size=7)
    assert set(got.as_dict()) == set(want)
    for (u, v), s in got.as_dict().items():
        assert abs(s - float(want[(u, v)])) < 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(3, 60), st.integers(1, 30))
def test_limit_is_prefix(seed, n, m):
    g = random_graph(np.random.default_rng(seed), n)
    full = ra_scores(g, filter_min_out=0)
    top = ra_scores(g, filter_min_out=0, limit=m, chunk_size=5)
    np.testing.assert_array_equal(top.u, full.u[:m])
    np.testing.assert_array_equal(top.v, full.v[:m])


@given(st.integers(0, 2**32 - 1), st.integers(3, 40))
def test_symmetric_without_filter(seed, n):
    g = random_graph(np.random.default_rng(seed), n)
    d = ra_scores(g, filter_min_out=0).as_dict()
    for (u, v), s in d.items():
        if not g.has_edge(v, u):
            assert d[(v, u)] == pytest.approx(s, abs=1e-15)


@given(st.integers(0, 2**32 - 1), st.integers(4, 30))
def test_extra_common_neighbour_never_lowers(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p=0.2)
    base = ra_bruteforce(g, 0)
    u, v, w = rng.choice(n, 3, replace=False).tolist()
    nb = {x for e in g.edges().tolist() for x in e if x != w and w in e}
    if g.has_edge(u, v) or (u in nb and v in nb):
        return
    h = Snapshot.from_edges(g.edges().tolist() + [(u, w), (w, v)], n)
    assert ra_bruteforce(h, 0).get((u, v), Fraction(0)) >= base.get((u, v), Fraction(0))


def test_sorted_with_tiebreak():
    c = Candidates.from_arrays([3, 1, 2], [0, 4, 0], [0.5, 0.5, 0.9])
    assert list(zip(c.u.tolist(), c.v.tolist())) == [(2, 0), (1, 4), (3, 0)]


def test_skip_mask():
    g = Snapshot.from_edges([(0, 1), (1, 2), (3, 1)], 4)
    skip = np.array([False, False, True, False])
    got = ra_scores(g, filter_min_out=0, skip=skip).as_dict()
    assert all(2 not in pair for pair in got) and (0, 3) in got


class TestGrowth:
    def test_mean(self):
        assert update_growth(update_growth(GrowthState(), 100), 120).estimate == 110

    def test_empty(self):
        assert GrowthState().estimate == 0

    def test_negative_clamped(self):
        assert GrowthState((-50, 10)).estimate == 0

    def test_organic_delta(self):
        before = LocalGraph.from_snapshot(Snapshot.from_edges([(0, 1)], 5))
        truth = Snapshot.from_edges([(0, 1), (0, 2), (0, 3)], 5, t=1)
        assert estimate_organic_delta(before, truth, [0], 1) == 8

    def test_no_probes(self):
        before = LocalGraph.from_snapshot(Snapshot.from_edges([(0, 1)], 5))
        assert estimate_organic_delta(before, Snapshot.from_edges([], 5, t=1), [], 1) == 0


class TestInferEdges:
    local = LocalGraph.from_snapshot(Snapshot.from_edges([(4, 5)], 6))
    cands = Candidates.from_arrays([0, 2], [1, 3], [0.9, 0.4])

    def test_zero_budget(self):
        new, added = infer_edges(self.local, self.cands, 0)
        assert new is self.local and added.shape == (0, 2)

    def test_all(self):
        new, _ = infer_edges(self.local, self.cands, 10)
        assert new.graph.edge_set() == {(4, 5), (0, 1), (2, 3)}

    def test_top_one(self):
        new, added = infer_edges(self.local, self.cands, 1)
        assert added.tolist() == [[0, 1]]
        assert new.inferred.tolist() == [1]

    def test_existing_skipped(self):
        c = Candidates.from_arrays([4, 0], [5, 1], [0.9, 0.4])
        _, added = infer_edges(self.local, c, 1)
        assert added.tolist() == [[0, 1]]

    def test_fresh_probes_skipped(self):
        truth = Snapshot.from_edges([(4, 5)], 6, t=1)
        local, _ = probe_update(self.local, truth, [0], 1)
        _, added = infer_edges(local, self.cands, 2)
        assert added.tolist() == [[2, 3]]

    def test_inferred_overwritten_by_probe(self):
        new, _ = infer_edges(self.local, self.cands, 2)
        truth = Snapshot.from_edges([(4, 5)], 6, t=1)
        after, _ = probe_update(new, truth, [0], 1)
        assert not after.graph.has_edge(0, 1) and after.graph.has_edge(2, 3)


def test_precision_and_random_baseline(rng):
    truth = Snapshot.from_edges([(0, 1), (1, 2)], 4)
    assert realized_precision(np.array([[0, 1], [2, 3]]), truth) == 0.5
    assert np.isnan(realized_precision(np.empty((0, 2)), truth))
    pairs = sample_non_edges(truth, 5, rng)
    assert len({tuple(p) for p in pairs.tolist()}) == 5
    assert not any(truth.has_edge(u, v) or u == v for u, v in pairs.tolist())


def test_predictor_estimator():
    g = Snapshot.from_edges([(0, 1), (1, 2)], 3)
    est = ResourceAllocationPredictor(filter_min_out=0).fit(g)
    assert est.predict(1).tolist() == [[0, 2]]
    assert est.score_pairs([(0, 2), (1, 0)]).tolist() == [0.5, 0.0]
