"""PageRank and weighted PageRank by power iteration.

Dangling vertices (no out-edges, or only zero-weight out-edges) spread
their mass uniformly over all vertices on every iteration, so scores stay
normalised on any graph.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator

from ._validation import check_damping, top_k_indices
from .graph import Snapshot

__all__ = [
    "RankVector",
    "PageRank",
    "pagerank",
    "weighted_pagerank",
    "differential_one_step",
    "write_ranks",
    "read_ranks",
]

DEFAULT_ALPHA = 0.85
DEFAULT_EPSILON = 1e-9
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class RankVector:
    scores: np.ndarray
    alpha: float
    iterations_used: int
    converged: bool

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return self.scores.size

    def __getitem__(self, v):
        return self.scores[v]

    def top_k(self, k: int) -> np.ndarray:
        return top_k_indices(self.scores, min(k, self.scores.size))


def _transition(g: Snapshot, weights: np.ndarray | None):
    """Column-stochastic link matrix (rows = targets) plus the dangling mask."""
    src, dst = g.src, g.dst
    if weights is None:
        w = np.ones(src.size)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != src.shape:
            raise ValueError(f"expected {src.size} edge weights, got {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("edge weights must be finite and non-negative")
    out_w = np.bincount(src, weights=w, minlength=g.n)
    dangling = out_w <= 0
    live = w > 0
    data = w[live] / out_w[src[live]]
    m = sp.csr_matrix((data, (dst[live], src[live])), shape=(g.n, g.n))
    return m, dangling


def _power_iterate(g: Snapshot, weights, alpha, epsilon, max_iter) -> RankVector:
    alpha = check_damping(alpha)
    if g.n < 1:
        raise ValueError("cannot rank an empty vertex set")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = g.n
    m, dangling = _transition(g, weights)
    teleport = (1.0 - alpha) / n
    pr = np.full(n, 1.0 / n)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = alpha * (m @ pr)
        new += alpha * pr[dangling].sum() / n + teleport
        err = np.abs(new - pr).sum()
        pr = new
        if err < epsilon:
            converged = True
            break
    pr = pr / pr.sum()
    return RankVector(scores=pr, alpha=alpha, iterations_used=it, converged=converged)


def pagerank(g: Snapshot, alpha: float = DEFAULT_ALPHA, epsilon: float = DEFAULT_EPSILON,
             max_iter: int = DEFAULT_MAX_ITER) -> RankVector:
    """Global PageRank; convergence is an L1 change below ``epsilon``."""
    return _power_iterate(g, None, alpha, epsilon, max_iter)


def weighted_pagerank(g: Snapshot, weights, alpha: float = DEFAULT_ALPHA,
                      epsilon: float = DEFAULT_EPSILON, max_iter: int = DEFAULT_MAX_ITER) -> RankVector:
    """PageRank where ``u`` passes rank to ``v`` in proportion to ``w(u, v) / W_out(u)``.

    ``weights`` is aligned with ``g.keys``. Vertices whose outgoing weight
    sums to zero are treated as dangling.
    """
    return _power_iterate(g, weights, alpha, epsilon, max_iter)


def differential_one_step(g: Snapshot, pr_old: RankVector, new_edge: tuple[int, int]) -> np.ndarray:
    """Predicted first-iteration rank change from adding ``u -> v``.

    ``v`` gains ``alpha * PR(u) / (d + 1)`` and every existing out-neighbour
    of ``u`` loses ``alpha * PR(u) / (d * (d + 1))``, where ``d`` is the
    current out-degree of ``u``. All other entries are zero.
    """
    u, v = map(int, new_edge)
    if not (0 <= u < g.n and 0 <= v < g.n) or u == v:
        raise ValueError(f"invalid edge {new_edge!r}")
    if g.has_edge(u, v):
        raise ValueError(f"edge {new_edge!r} already present")
    d = int(g.out_degree[u])
    if d == 0:
        raise ValueError(f"vertex {u} is dangling; the one-step analysis needs out-degree >= 1")
    alpha, pu = pr_old.alpha, float(pr_old.scores[u])
    delta = np.zeros(g.n)
    delta[g.dst[g.src == u]] = -alpha * pu / (d * (d + 1))
    delta[v] = alpha * pu / (d + 1)
    return delta


class PageRank(BaseEstimator):
    """Estimator wrapper: ``fit(graph[, weights])`` stores ``scores_``.

    Parameters
    ----------
    alpha : float
        Damping factor.
    epsilon : float
        L1 convergence threshold.
    max_iter : int
        Iteration cap.
    """

    def __init__(self, alpha=DEFAULT_ALPHA, epsilon=DEFAULT_EPSILON, max_iter=DEFAULT_MAX_ITER):
        self.alpha = alpha
        self.epsilon = epsilon
        self.max_iter = max_iter

    def fit(self, graph: Snapshot, weights=None):
        rv = _power_iterate(graph, weights, self.alpha, self.epsilon, self.max_iter)
        self.rank_ = rv
        self.scores_ = rv.scores
        self.n_iter_ = rv.iterations_used
        self.converged_ = rv.converged
        return self

    def fit_transform(self, graph: Snapshot, weights=None) -> np.ndarray:
        return self.fit(graph, weights).scores_


def write_ranks(rank: RankVector | np.ndarray, path: str | os.PathLike) -> None:
    """CSV ``vertex_id,score`` sorted by id, 17 significant digits."""
    scores = rank.scores if isinstance(rank, RankVector) else np.asarray(rank)
    with open(path, "w", newline="\n") as fh:
        fh.write("vertex_id,score\n")
        fh.writelines(f"{i},{s:.17g}\n" for i, s in enumerate(scores.tolist()))


def read_ranks(path: str | os.PathLike) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    scores = np.zeros(int(data[:, 0].max()) + 1 if data.size else 0)
    scores[data[:, 0].astype(int)] = data[:, 1]
    return scores
