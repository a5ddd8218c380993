"""Directed snapshots, the partially observed local graph, and probe updates.

Edges are stored as sorted unique ``int64`` keys ``u * n + v`` so that
set algebra between snapshots is a handful of vectorised numpy calls.
An edge ``(u, v)`` means *u follows v*.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from ._validation import check_vertex_ids

__all__ = [
    "Snapshot",
    "LocalGraph",
    "EdgeDelta",
    "DegreeView",
    "edge_diff",
    "probe_update",
    "degree_views",
    "read_snapshot",
    "write_snapshot",
]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def encode_edges(edges, n: int) -> np.ndarray:
    """Pack an ``(m, 2)`` array-like of ``(u, v)`` pairs into sorted unique keys."""
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty(0, dtype=np.int64)
    arr = arr.reshape(-1, 2)
    return np.unique(arr[:, 0] * n + arr[:, 1])


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Ground-truth (or estimated) directed graph over vertices ``0..n-1`` at period ``t``."""

    n: int
    keys: np.ndarray
    t: int = 0

    def __post_init__(self):
        keys = np.asarray(self.keys, dtype=np.int64)
        if keys.size:
            if np.any(keys[1:] <= keys[:-1]):
                keys = np.unique(keys)
            if keys[0] < 0 or keys[-1] >= self.n * self.n:
                raise ValueError("edge endpoint outside the vertex universe")
            if np.any(keys // self.n == keys % self.n):
                raise ValueError("self-loops are not allowed")
        object.__setattr__(self, "keys", _freeze(keys))

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], n: int, t: int = 0) -> "Snapshot":
        edges = list(edges) if not isinstance(edges, np.ndarray) else edges
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if arr.size:
            check_vertex_ids(arr.ravel(), n, "edge endpoints")
        return cls(n=n, keys=encode_edges(arr, n), t=t)

    @property
    def n_edges(self) -> int:
        return int(self.keys.size)

    @cached_property
    def src(self) -> np.ndarray:
        return _freeze(self.keys // self.n)

    @cached_property
    def dst(self) -> np.ndarray:
        return _freeze(self.keys % self.n)

    def edges(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` array, sorted by ``(u, v)``."""
        return np.column_stack([self.src, self.dst])

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    @cached_property
    def _key_set(self) -> frozenset:
        return frozenset(self.keys.tolist())

    def has_edge(self, u: int, v: int) -> bool:
        return int(u) * self.n + int(v) in self._key_set

    def contains(self, keys: np.ndarray) -> np.ndarray:
        """Vectorised membership test for an array of edge keys."""
        return np.isin(keys, self.keys, assume_unique=False)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return _freeze(np.bincount(self.dst, minlength=self.n).astype(np.int64))

    @cached_property
    def out_degree(self) -> np.ndarray:
        return _freeze(np.bincount(self.src, minlength=self.n).astype(np.int64))

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Binary CSR matrix with ``A[u, v] = 1`` for each edge."""
        data = np.ones(self.keys.size, dtype=np.float64)
        return sp.csr_matrix((data, (self.src, self.dst)), shape=(self.n, self.n))

    def with_period(self, t: int) -> "Snapshot":
        return Snapshot(n=self.n, keys=self.keys, t=t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Snapshot):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.keys, other.keys)

    def __repr__(self) -> str:
        return f"Snapshot(n={self.n}, edges={self.n_edges}, t={self.t})"


@dataclass(frozen=True, eq=False)
class EdgeDelta:
    """Edges added and removed between two edge sets, as ``(m, 2)`` arrays."""

    added: np.ndarray
    removed: np.ndarray

    @classmethod
    def from_keys(cls, added: np.ndarray, removed: np.ndarray, n: int) -> "EdgeDelta":
        return cls(added=np.column_stack([added // n, added % n]).astype(np.int64),
                   removed=np.column_stack([removed // n, removed % n]).astype(np.int64))

    @property
    def is_empty(self) -> bool:
        return len(self.added) == 0 and len(self.removed) == 0

    def added_set(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.added.tolist()))

    def removed_set(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.removed.tolist()))

    def apply(self, edges) -> set[tuple[int, int]]:
        return (set(map(tuple, edges)) | self.added_set()) - self.removed_set()


def _as_keys(edges, n: int) -> np.ndarray:
    if isinstance(edges, Snapshot):
        return edges.keys
    return encode_edges(list(edges) if not isinstance(edges, np.ndarray) else edges, n)


def edge_diff(a, b, n: int | None = None) -> EdgeDelta:
    """``added = b - a`` and ``removed = a - b`` for two edge collections."""
    if n is None:
        if isinstance(a, Snapshot):
            n = a.n
        elif isinstance(b, Snapshot):
            n = b.n
        else:
            ids = [x for e in list(a) + list(b) for x in e]
            n = max(ids) + 1 if ids else 1
    ka, kb = _as_keys(a, n), _as_keys(b, n)
    return EdgeDelta.from_keys(np.setdiff1d(kb, ka, assume_unique=True),
                               np.setdiff1d(ka, kb, assume_unique=True), n)


@dataclass(frozen=True, eq=False)
class LocalGraph:
    """The maintained partial observation of the network.

    ``last_probed[v]`` is the period ``v`` was last probed, ``-1`` if never
    (its edges then date from the full observation at ``t = 0``).
    ``inferred`` holds keys of edges added by link prediction rather than
    observed by a probe.
    """

    graph: Snapshot
    last_probed: np.ndarray
    inferred: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        lp = np.asarray(self.last_probed, dtype=np.int64)
        if lp.shape != (self.graph.n,):
            raise ValueError("last_probed must cover the whole vertex universe")
        object.__setattr__(self, "last_probed", _freeze(lp))
        object.__setattr__(self, "inferred", _freeze(np.asarray(self.inferred, dtype=np.int64)))

    @classmethod
    def from_snapshot(cls, snapshot: Snapshot) -> "LocalGraph":
        """Full observation: the local graph starts identical to ``snapshot``."""
        return cls(graph=snapshot, last_probed=np.full(snapshot.n, -1, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.graph.n

    def observed_keys(self) -> np.ndarray:
        """Edge keys that came from observation, excluding inferred ones."""
        if self.inferred.size == 0:
            return self.graph.keys
        return np.setdiff1d(self.graph.keys, self.inferred, assume_unique=True)


def probe_update(local: LocalGraph, truth: Snapshot, probed, t: int) -> tuple[LocalGraph, EdgeDelta]:
    """Replace every edge incident on a probed vertex with its ground-truth state.

    Probing covers both relation directions (followers and friends), so the
    in- and out-edges of each probed vertex end up exactly as in ``truth``;
    edges with no probed endpoint are carried over from ``local``.
    """
    if truth.n != local.n:
        raise ValueError(f"universe mismatch: local has {local.n} vertices, truth {truth.n}")
    if truth.t != t:
        raise ValueError(f"truth snapshot is for period {truth.t}, expected {t}")
    probed = check_vertex_ids(probed, local.n, "probed vertex ids")
    if probed.size == 0:
        return local, EdgeDelta.from_keys(np.empty(0, np.int64), np.empty(0, np.int64), local.n)

    mask = np.zeros(local.n, dtype=bool)
    mask[probed] = True
    g = local.graph
    touched_local = mask[g.src] | mask[g.dst]
    touched_truth = mask[truth.src] | mask[truth.dst]
    kept = g.keys[~touched_local]
    fresh = truth.keys[touched_truth]
    keys = np.union1d(kept, fresh)

    last_probed = local.last_probed.copy()
    last_probed[probed] = t
    inferred = local.inferred
    if inferred.size:
        inferred = np.intersect1d(inferred, kept, assume_unique=True)
    new_local = LocalGraph(graph=Snapshot(n=local.n, keys=keys, t=t),
                           last_probed=last_probed, inferred=inferred)
    delta = EdgeDelta.from_keys(np.setdiff1d(fresh, g.keys[touched_local], assume_unique=True),
                                np.setdiff1d(g.keys[touched_local], fresh, assume_unique=True),
                                local.n)
    return new_local, delta


class DegreeView:
    """Constant-time degree lookup and adjacency accessors for a snapshot."""

    def __init__(self, g: Snapshot):
        self._g = g
        self.in_degree = g.in_degree
        self.out_degree = g.out_degree
        self._out = g.adjacency
        self._in = g.adjacency.T.tocsr()

    def _check(self, v: int) -> int:
        v = int(v)
        if not 0 <= v < self._g.n:
            raise ValueError(f"unknown vertex {v}")
        return v

    def in_neighbors(self, v: int) -> np.ndarray:
        v = self._check(v)
        return self._in.indices[self._in.indptr[v]:self._in.indptr[v + 1]]

    def out_neighbors(self, v: int) -> np.ndarray:
        v = self._check(v)
        return self._out.indices[self._out.indptr[v]:self._out.indptr[v + 1]]

    def degree(self, v: int) -> tuple[int, int]:
        v = self._check(v)
        return int(self.in_degree[v]), int(self.out_degree[v])


def degree_views(g: Snapshot) -> DegreeView:
    return DegreeView(g)


def write_snapshot(g: Snapshot, directory: str | os.PathLike) -> Path:
    """Write ``snapshot_<t>.tsv`` (and ``vertices_<t>.txt`` when isolated vertices exist)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"snapshot_{g.t}.tsv"
    with open(path, "w", newline="\n") as fh:
        fh.writelines(f"{u}\t{v}\n" for u, v in zip(g.src.tolist(), g.dst.tolist()))
    isolated = np.flatnonzero((g.in_degree == 0) & (g.out_degree == 0))
    if isolated.size:
        with open(directory / f"vertices_{g.t}.txt", "w", newline="\n") as fh:
            fh.writelines(f"{v}\n" for v in isolated.tolist())
    return path


def _read_edge_file(path: Path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u<TAB>v', got {line!r}")
            rows.append((int(parts[0]), int(parts[1])))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def read_snapshot(directory: str | os.PathLike, t: int, n: int | None = None) -> Snapshot:
    """Load ``snapshot_<t>.tsv`` from ``directory``.

    ``n`` fixes the vertex universe; when omitted it is inferred from the
    largest id in the edge list and the optional ``vertices_<t>.txt``.
    """
    directory = Path(directory)
    path = directory / f"snapshot_{t}.tsv"
    if not path.exists():
        raise FileNotFoundError(f"missing snapshot file: {path}")
    edges = _read_edge_file(path)
    max_id = int(edges.max()) if edges.size else -1
    vpath = directory / f"vertices_{t}.txt"
    if vpath.exists():
        with open(vpath) as fh:
            ids = [int(x) for x in fh.read().split()]
        if ids:
            max_id = max(max_id, max(ids))
    if n is None:
        n = max_id + 1
    elif max_id >= n:
        raise ValueError(f"{path}: vertex id {max_id} outside universe of size {n}")
    return Snapshot.from_edges(edges, n=max(n, 1), t=t)
