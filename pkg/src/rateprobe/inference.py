"""Resource-allocation link prediction and growth-budgeted edge inference.

Neighbourhoods and degrees are taken on the undirected view of the follower
graph. A candidate ``(u, v)`` is a directed non-edge whose endpoints share at
least one neighbour; pairs without a common neighbour score zero and are
never materialised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator

from ._validation import check_positive_int, make_rng, round_half_up
from .graph import LocalGraph, Snapshot

__all__ = [
    "CandidatePair",
    "Candidates",
    "GrowthState",
    "ra_scores",
    "update_growth",
    "estimate_organic_delta",
    "infer_edges",
    "realized_precision",
    "sample_non_edges",
    "ResourceAllocationPredictor",
    "write_inferred",
]

DEFAULT_FILTER_MIN_OUT = 5


@dataclass(frozen=True)
class CandidatePair:
    u: int
    v: int
    ra: float


@dataclass(frozen=True, eq=False)
class Candidates:
    """Scored directed candidates sorted by descending RA, then ``(u, v)``."""

    u: np.ndarray
    v: np.ndarray
    ra: np.ndarray

    def __len__(self) -> int:
        return int(self.u.size)

    def __iter__(self):
        for u, v, s in zip(self.u.tolist(), self.v.tolist(), self.ra.tolist()):
            yield CandidatePair(u, v, s)

    def head(self, m: int) -> "Candidates":
        return Candidates(self.u[:m], self.v[:m], self.ra[:m])

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(p.u, p.v): p.ra for p in self}

    @classmethod
    def from_arrays(cls, u, v, ra) -> "Candidates":
        u, v, ra = (np.asarray(x) for x in (u, v, ra))
        order = np.lexsort((v, u, -ra))
        return cls(u[order].astype(np.int64), v[order].astype(np.int64), ra[order].astype(np.float64))


def _undirected(g: Snapshot):
    a = g.adjacency
    sym = ((a + a.T) > 0).astype(np.float64).tocsr()
    total_degree = (g.in_degree + g.out_degree).astype(np.float64)
    return sym, total_degree


def ra_scores(g: Snapshot, filter_min_out: int = DEFAULT_FILTER_MIN_OUT,
              limit: int | None = None, chunk_size: int = 512, skip=None) -> Candidates:
    """RA index for every directed non-edge with a common neighbour.

    ``RA(u, v) = sum over common neighbours w of 1 / degree(w)``. A pair is
    kept only if the prospective follower ``u`` already follows at least
    ``filter_min_out`` accounts. With ``limit`` set, only the ``limit``
    best candidates are returned (computed chunk-wise to bound memory).
    ``skip`` is an optional boolean vertex mask; pairs touching a masked
    vertex are left out (e.g. vertices whose relations were just observed).
    """
    n = g.n
    if n == 0:
        raise ValueError("graph has no vertices")
    sym, deg = _undirected(g)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    right = sp.diags(inv) @ sym
    ok = g.out_degree >= filter_min_out
    if skip is not None:
        skip = np.asarray(skip, dtype=bool)
        if skip.shape != (n,):
            raise ValueError("skip mask must cover the vertex universe")
        ok &= ~skip
    eligible = np.flatnonzero(ok)

    exclude = (g.adjacency + sp.identity(n, format="csr")).tocsr()
    us, vs, ss = [], [], []
    for start in range(0, eligible.size, chunk_size):
        rows = eligible[start:start + chunk_size]
        block = (sym[rows] @ right).tocsr()
        block = (block - block.multiply(exclude[rows])).tocsr()
        block.eliminate_zeros()
        block = block.tocoo()
        u, v, s = rows[block.row], block.col.astype(np.int64), block.data
        keep = s > 0
        if skip is not None:
            keep &= ~skip[v]
        u, v, s = u[keep], v[keep], s[keep]
        if limit is not None and s.size > limit:
            # everything tied with the limit-th best survives, then exact ordering
            cut = -np.partition(-s, limit - 1)[limit - 1]
            keep = s >= cut
            u, v, s = u[keep], v[keep], s[keep]
        us.append(u)
        vs.append(v)
        ss.append(s)
        if limit is not None and sum(x.size for x in ss) > 4 * limit + chunk_size:
            merged = Candidates.from_arrays(np.concatenate(us), np.concatenate(vs), np.concatenate(ss)).head(limit)
            us, vs, ss = [merged.u], [merged.v], [merged.ra]
    if not us:
        empty = np.empty(0, dtype=np.int64)
        return Candidates(empty, empty.copy(), np.empty(0))
    out = Candidates.from_arrays(np.concatenate(us), np.concatenate(vs), np.concatenate(ss))
    return out.head(limit) if limit is not None else out


@dataclass(frozen=True)
class GrowthState:
    """Per-period organic edge-growth observations and the derived budget."""

    history: tuple[int, ...] = ()

    @property
    def estimate(self) -> int:
        if not self.history:
            return 0
        return max(0, round_half_up(float(np.mean(self.history))))


def update_growth(state: GrowthState, organic_delta: int) -> GrowthState:
    return GrowthState(state.history + (int(organic_delta),))


def estimate_organic_delta(before: LocalGraph, truth: Snapshot, probed, t: int) -> int:
    """Extrapolate probe-observed edge growth to the unprobed population.

    Each probed vertex contributes its net out-degree change per elapsed
    period since its relations were last observed (out-edges only, so every
    edge is counted once). The mean rate is scaled by the number of
    vertices that were not probed.
    """
    probed = np.asarray(probed, dtype=np.int64)
    if probed.size == 0 or t < 1:
        return 0
    observed = before.observed_keys()
    out_before = np.bincount(observed // before.n, minlength=before.n)[probed]
    out_after = truth.out_degree[probed]
    elapsed = t - np.maximum(before.last_probed[probed], 0)
    rate = (out_after - out_before) / np.maximum(elapsed, 1)
    return round_half_up(float(rate.mean()) * (before.n - probed.size))


def infer_edges(local: LocalGraph, candidates: Candidates, e_g: int) -> tuple[LocalGraph, np.ndarray]:
    """Add the ``e_g`` best candidates to ``local`` as inferred edges.

    Candidates already present, self-loops, and pairs touching a vertex
    probed in the local graph's current period (its relations are known
    exactly) are skipped rather than counted. Returns the new local graph
    and the ``(m, 2)`` edges added.
    """
    e_g = check_positive_int(e_g, "e_g", allow_zero=True)
    n = local.n
    if e_g == 0 or len(candidates) == 0:
        return local, np.empty((0, 2), dtype=np.int64)
    keys = candidates.u * n + candidates.v
    fresh = local.last_probed == local.graph.t
    ok = (candidates.u != candidates.v) & ~np.isin(keys, local.graph.keys)
    ok &= ~fresh[candidates.u] & ~fresh[candidates.v]
    _, first = np.unique(keys, return_index=True)
    unique_mask = np.zeros(keys.size, dtype=bool)
    unique_mask[first] = True
    picked = keys[ok & unique_mask][:e_g]
    if picked.size == 0:
        return local, np.empty((0, 2), dtype=np.int64)
    graph = Snapshot(n=n, keys=np.union1d(local.graph.keys, picked), t=local.graph.t)
    new = LocalGraph(graph=graph, last_probed=local.last_probed,
                     inferred=np.union1d(local.inferred, picked))
    return new, np.column_stack([picked // n, picked % n])


def realized_precision(edges: np.ndarray, truth: Snapshot) -> float:
    """Fraction of ``edges`` present in ``truth``; NaN for an empty list."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.shape[0] == 0:
        return float("nan")
    return float(np.isin(edges[:, 0] * truth.n + edges[:, 1], truth.keys).mean())


def sample_non_edges(g: Snapshot, m: int, rng) -> np.ndarray:
    """``m`` distinct uniformly random directed non-edges of ``g`` (no self-loops)."""
    rng = make_rng(rng)
    n = g.n
    capacity = n * (n - 1) - g.n_edges
    m = min(int(m), capacity)
    found = np.empty(0, dtype=np.int64)
    while found.size < m:
        draw = rng.integers(0, n * n, size=2 * (m - found.size) + 16)
        draw = draw[(draw // n != draw % n) & ~np.isin(draw, g.keys)]
        found = np.concatenate([found, draw[~np.isin(draw, found)]])
        _, first = np.unique(found, return_index=True)
        found = found[np.sort(first)]
    found = found[:m]
    return np.column_stack([found // n, found % n])


class ResourceAllocationPredictor(BaseEstimator):
    """Estimator form of the RA link predictor.

    ``fit(graph)`` scores candidates; ``predict(m)`` returns the ``m``
    highest-scoring directed edges.
    """

    def __init__(self, filter_min_out=DEFAULT_FILTER_MIN_OUT, limit=None):
        self.filter_min_out = filter_min_out
        self.limit = limit

    def fit(self, graph: Snapshot):
        self.candidates_ = ra_scores(graph, self.filter_min_out, limit=self.limit)
        return self

    def predict(self, m: int) -> np.ndarray:
        top = self.candidates_.head(m)
        return np.column_stack([top.u, top.v])

    def score_pairs(self, pairs) -> np.ndarray:
        lookup = self.candidates_.as_dict()
        return np.array([lookup.get((int(u), int(v)), 0.0) for u, v in pairs])


def write_inferred(path, edges: np.ndarray, candidates: Candidates) -> None:
    """Audit file ``inferred_<t>.tsv`` with columns ``u, v, ra_score``."""
    lookup = {(u, v): s for u, v, s in zip(candidates.u.tolist(), candidates.v.tolist(), candidates.ra.tolist())}
    with open(path, "w", newline="\n") as fh:
        fh.write("u\tv\tra_score\n")
        for u, v in np.asarray(edges).reshape(-1, 2).tolist():
            fh.write(f"{u}\t{v}\t{lookup.get((u, v), 0.0):.17g}\n")
