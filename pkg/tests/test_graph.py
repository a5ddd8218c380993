import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rateprobe.graph import (EdgeDelta, LocalGraph, Snapshot, degree_views, edge_diff, probe_update,
                             read_snapshot, write_snapshot)


def edge_sets(n):
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1])
    return st.sets(pairs, max_size=40)


N = 8


def snap(edges, t=0, n=N):
    return Snapshot.from_edges(edges, n, t)


class TestSnapshot:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            Snapshot.from_edges([(1, 1)], 3)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Snapshot.from_edges([(0, 3)], 3)

    def test_duplicates_collapse(self):
        g = Snapshot.from_edges([(0, 1), (0, 1), (1, 2)], 3)
        assert g.n_edges == 2
        assert g.edge_set() == {(0, 1), (1, 2)}

    def test_membership(self):
        g = snap([(0, 1)])
        assert g.has_edge(0, 1) and not g.has_edge(1, 0)


class TestEdgeDiff:
    def test_equal_sets(self):
        d = edge_diff({(0, 1)}, {(0, 1)}, n=3)
        assert d.is_empty

    def test_from_empty(self):
        d = edge_diff(set(), {(0, 1)}, n=3)
        assert d.added_set() == {(0, 1)} and d.removed_set() == set()

    def test_hand_example(self):
        d = edge_diff({(0, 1), (1, 2)}, {(1, 2), (2, 0)}, n=3)
        assert d.added_set() == {(2, 0)}
        assert d.removed_set() == {(0, 1)}

    @given(edge_sets(N), edge_sets(N))
    def test_reconstructs(self, a, b):
        d = edge_diff(a, b, n=N)
        assert d.apply(a) == b
        assert not (d.added_set() & d.removed_set())


class TestProbeUpdate:
    def test_empty_probe(self):
        local = LocalGraph.from_snapshot(snap([(0, 1), (2, 3)]))
        new, delta = probe_update(local, snap([(1, 0)], t=1), [], 1)
        assert new.graph.edge_set() == {(0, 1), (2, 3)}
        assert delta.is_empty

    def test_probe_all(self):
        local = LocalGraph.from_snapshot(snap([(0, 1), (2, 3)]))
        truth = snap([(1, 0), (3, 4)], t=1)
        new, _ = probe_update(local, truth, range(N), 1)
        assert new.graph == truth

    def test_three_vertex_case(self):
        local = LocalGraph.from_snapshot(Snapshot.from_edges([(0, 1)], 3))
        truth = Snapshot.from_edges([(0, 2)], 3, t=1)
        new, delta = probe_update(local, truth, [0], 1)
        assert new.graph.edge_set() == {(0, 2)}
        assert delta.added_set() == {(0, 2)} and delta.removed_set() == {(0, 1)}

    def test_in_edges_refreshed_too(self):
        local = LocalGraph.from_snapshot(Snapshot.from_edges([(1, 0)], 3))
        truth = Snapshot.from_edges([(2, 0)], 3, t=1)
        new, _ = probe_update(local, truth, [0], 1)
        assert new.graph.edge_set() == {(2, 0)}

    def test_last_probed(self):
        local = LocalGraph.from_snapshot(snap([]))
        new, _ = probe_update(local, snap([], t=3), [2, 5], 3)
        assert new.last_probed[2] == 3 and new.last_probed[5] == 3
        assert new.last_probed[0] == -1

    def test_unknown_vertex(self):
        local = LocalGraph.from_snapshot(snap([]))
        with pytest.raises(ValueError):
            probe_update(local, snap([], t=1), [N], 1)

    def test_wrong_period(self):
        local = LocalGraph.from_snapshot(snap([]))
        with pytest.raises(ValueError):
            probe_update(local, snap([], t=2), [0], 1)

    def test_drops_inferred_on_probed(self):
        g = snap([(0, 1), (2, 3)])
        local = LocalGraph(g, np.full(N, -1), inferred=np.array([0 * N + 1, 2 * N + 3]))
        new, _ = probe_update(local, snap([(2, 3)], t=1), [0], 1)
        assert new.inferred.tolist() == [2 * N + 3]

    @given(edge_sets(N), edge_sets(N), st.sets(st.integers(0, N - 1)))
    def test_properties(self, a, b, probed):
        local = LocalGraph.from_snapshot(snap(a))
        truth = snap(b, t=1)
        new, delta = probe_update(local, truth, sorted(probed), 1)
        got = new.graph.edge_set()
        for u in probed:
            assert {e for e in got if u in e} == {e for e in b if u in e}
        for e in a | b:
            if e[0] not in probed and e[1] not in probed:
                assert (e in got) == (e in a)
        assert delta.apply(a) == got
        again, _ = probe_update(new, truth, sorted(probed), 1)
        assert again.graph == new.graph

    @given(edge_sets(N), edge_sets(N))
    def test_probe_all_any_state(self, a, b):
        new, _ = probe_update(LocalGraph.from_snapshot(snap(a)), snap(b, t=1), range(N), 1)
        assert new.graph.edge_set() == b


class TestDegreeViews:
    def test_single_edge(self):
        d = degree_views(Snapshot.from_edges([(0, 1)], 3))
        assert 0 in d.in_neighbors(1).tolist() and 1 in d.out_neighbors(0).tolist()
        assert d.out_degree[0] == 1 and d.in_degree[1] == 1

    def test_isolated(self):
        d = degree_views(Snapshot.from_edges([(0, 1)], 3))
        assert d.degree(2) == (0, 0)

    def test_cycle(self):
        d = degree_views(Snapshot.from_edges([(0, 1), (1, 2), (2, 0)], 3))
        assert d.in_degree.tolist() == [1, 1, 1] and d.out_degree.tolist() == [1, 1, 1]

    def test_unknown(self):
        with pytest.raises(ValueError):
            degree_views(Snapshot.from_edges([], 3)).degree(3)


def test_snapshot_roundtrip(tmp_path):
    g = Snapshot.from_edges([(0, 1), (3, 2)], 6, t=4)
    write_snapshot(g, tmp_path)
    assert (tmp_path / "snapshot_4.tsv").read_text().splitlines()[0] == "0\t1"
    back = read_snapshot(tmp_path, 4, n=6)
    assert back == g and back.t == 4


def test_snapshot_isolated_vertices_file(tmp_path):
    g = Snapshot.from_edges([(0, 1)], 4, t=0)
    write_snapshot(g, tmp_path)
    assert read_snapshot(tmp_path, 0).n == 4


def test_missing_snapshot(tmp_path):
    with pytest.raises(FileNotFoundError, match="snapshot_9.tsv"):
        read_snapshot(tmp_path, 9)
