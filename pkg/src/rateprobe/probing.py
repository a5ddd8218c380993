"""Probe-selection strategies over influence-past time series.

Every strategy breaks ties by ascending vertex id and draws randomness only
from the generator it is handed, so a run is a pure function of its inputs
and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive_int, check_unit_interval, make_rng, top_k_indices
from .graph import Snapshot

__all__ = [
    "InfluencePast",
    "RoundRobinRecord",
    "StrategyConfig",
    "PriorityState",
    "ProbeContext",
    "change_component",
    "change_scores",
    "change_score",
    "select_change",
    "select_rrch",
    "select_priority",
    "select_indegree",
    "select_random",
    "noprobe",
    "NoProbe",
    "RandomProbe",
    "IndegreeProbe",
    "PriorityProbe",
    "ChangeProbe",
    "RoundRobinChangeProbe",
    "STRATEGIES",
    "make_strategy",
]


class InfluencePast:
    """Append-only per-vertex score series, one row per period."""

    def __init__(self, n_vertices: int):
        self.n = int(n_vertices)
        self._rows: list[np.ndarray] = []
        # running mean and sum of squared deviations (Welford)
        self._mean = np.zeros(self.n)
        self._m2 = np.zeros(self.n)

    def append(self, values) -> None:
        row = np.array(values, dtype=np.float64)
        if row.shape != (self.n,):
            raise ValueError(f"expected {self.n} values, got shape {row.shape}")
        if not np.all(np.isfinite(row)) or np.any(row < 0):
            raise ValueError("influence values must be finite and non-negative")
        row.setflags(write=False)
        self._rows.append(row)
        d = row - self._mean
        self._mean += d / len(self._rows)
        self._m2 += d * (row - self._mean)

    def __len__(self) -> int:
        return len(self._rows)

    def last(self) -> np.ndarray:
        if not self._rows:
            raise ValueError("influence past is empty")
        return self._rows[-1]

    def series(self, v: int) -> np.ndarray:
        return np.array([row[v] for row in self._rows])

    def as_array(self) -> np.ndarray:
        return np.vstack(self._rows) if self._rows else np.empty((0, self.n))

    def std(self) -> np.ndarray:
        # population sigma; fewer than two points carry no variability
        if len(self._rows) < 2:
            return np.zeros(self.n)
        return np.sqrt(np.maximum(self._m2, 0.0) / len(self._rows))


def change_component(ip: InfluencePast, v: int) -> float:
    s = ip.series(v)
    return float(s.std(ddof=0)) if s.size >= 2 else 0.0


def change_score(v: int, ip: InfluencePast, last_pr: float, theta: float) -> float:
    theta = check_unit_interval(theta, "theta")
    return (1 - theta) * last_pr + theta * change_component(ip, v)


def change_scores(ip: InfluencePast, last: np.ndarray, theta: float) -> np.ndarray:
    """Vectorised ``(1 - theta) * last + theta * sigma`` for every vertex."""
    theta = check_unit_interval(theta, "theta")
    return (1 - theta) * np.asarray(last, dtype=np.float64) + theta * ip.std()


def select_change(scores, k: int) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    k = check_positive_int(k, "k", allow_zero=True)
    if k > scores.size:
        raise ValueError(f"k={k} exceeds the number of vertices ({scores.size})")
    return top_k_indices(scores, k)


@dataclass(frozen=True, eq=False)
class RoundRobinRecord:
    """Vertices already taken by the round-robin arm since the last reset."""

    marked: np.ndarray

    @classmethod
    def empty(cls, n_vertices: int) -> "RoundRobinRecord":
        return cls(np.zeros(n_vertices, dtype=bool))

    def __post_init__(self):
        marked = np.array(self.marked, dtype=bool)
        marked.setflags(write=False)
        object.__setattr__(self, "marked", marked)

    def __len__(self) -> int:
        return int(self.marked.sum())

    def __contains__(self, v) -> bool:
        return bool(self.marked[int(v)])


@dataclass(frozen=True)
class StrategyConfig:
    theta: float = 0.5
    beta: float = 0.8
    k: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        check_unit_interval(self.theta, "theta")
        check_unit_interval(self.beta, "beta")
        check_positive_int(self.k, "k", allow_zero=True)

    def validate(self, n_vertices: int) -> None:
        if self.k > n_vertices:
            raise ValueError(f"k={self.k} exceeds the number of vertices ({n_vertices})")

    @property
    def n_change(self) -> int:
        # guard against beta * k landing a hair above an integer
        return min(self.k, math.ceil(self.beta * self.k - 1e-9))


def select_rrch(scores, rr: RoundRobinRecord, cfg: StrategyConfig, rng) -> tuple[np.ndarray, RoundRobinRecord]:
    """Round-robin-change selection.

    ``ceil(beta * k)`` vertices come from the change ranking; the rest are
    drawn uniformly from vertices the round-robin arm has not yet taken.
    When those run out the record resets and drawing continues.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    cfg.validate(n)
    rng = make_rng(rng)
    chosen = select_change(scores, cfg.n_change)
    taken = np.zeros(n, dtype=bool)
    taken[chosen] = True
    marked = rr.marked.copy()
    need = cfg.k - chosen.size
    picks = []
    while need > 0:
        pool = np.flatnonzero(~marked & ~taken)
        if pool.size == 0:
            marked[:] = False
            continue
        draw = pool if pool.size <= need else rng.choice(pool, size=need, replace=False)
        marked[draw] = True
        taken[draw] = True
        picks.append(draw)
        need -= draw.size
        if marked.all():
            marked[:] = False
    if picks:
        chosen = np.concatenate([chosen, *picks]).astype(np.int64)
    return chosen, RoundRobinRecord(marked)


@dataclass(frozen=True, eq=False)
class PriorityState:
    priority: np.ndarray

    @classmethod
    def zeros(cls, n_vertices: int) -> "PriorityState":
        return cls(np.zeros(n_vertices))


def select_priority(state: PriorityState, pr_now, k: int) -> tuple[np.ndarray, PriorityState]:
    """Accumulate current PageRank into priorities, take the top-k, zero them."""
    pr_now = np.asarray(getattr(pr_now, "scores", pr_now), dtype=np.float64)
    priority = state.priority + pr_now
    chosen = select_change(priority, k)
    priority[chosen] = 0.0
    return chosen, PriorityState(priority)


def select_indegree(g: Snapshot, ip_deg: InfluencePast, theta: float, k: int) -> np.ndarray:
    return select_change(change_scores(ip_deg, g.in_degree, theta), k)


def select_random(universe, k: int, rng) -> np.ndarray:
    universe = np.arange(universe) if np.isscalar(universe) else np.sort(np.asarray(universe, dtype=np.int64))
    k = check_positive_int(k, "k", allow_zero=True)
    if k > universe.size:
        raise ValueError(f"cannot sample {k} of {universe.size} vertices")
    if k == universe.size:
        return universe.copy()
    return make_rng(rng).choice(universe, size=k, replace=False)


def noprobe() -> np.ndarray:
    return np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class ProbeContext:
    """Everything a strategy may look at when choosing the period-``t`` probes.

    All series hold values from periods ``< t`` only.
    """

    t: int
    k: int
    local: Snapshot
    influence_past: InfluencePast
    degree_past: InfluencePast
    last_pr: np.ndarray


class _Strategy(BaseEstimator):
    name = "base"

    def reset(self, n_vertices: int, random_state=None):
        self.n_vertices_ = n_vertices
        self.rng_ = make_rng(getattr(self, "seed", 0) if random_state is None else random_state, self.name)
        return self

    def select(self, ctx: ProbeContext) -> np.ndarray:
        raise NotImplementedError


class NoProbe(_Strategy):
    name = "noprobe"

    def select(self, ctx):
        return noprobe()


class RandomProbe(_Strategy):
    name = "random"

    def __init__(self, seed=0):
        self.seed = seed

    def select(self, ctx):
        return select_random(ctx.local.n, ctx.k, self.rng_)


class IndegreeProbe(_Strategy):
    name = "indegree"

    def __init__(self, theta=0.5):
        self.theta = theta

    def select(self, ctx):
        return select_indegree(ctx.local, ctx.degree_past, self.theta, ctx.k)


class PriorityProbe(_Strategy):
    name = "priority"

    def reset(self, n_vertices, random_state=None):
        super().reset(n_vertices, random_state)
        self.state_ = PriorityState.zeros(n_vertices)
        return self

    def select(self, ctx):
        chosen, self.state_ = select_priority(self.state_, ctx.last_pr, ctx.k)
        return chosen


class ChangeProbe(_Strategy):
    name = "change"

    def __init__(self, theta=0.5):
        self.theta = theta

    def select(self, ctx):
        return select_change(change_scores(ctx.influence_past, ctx.last_pr, self.theta), ctx.k)


class RoundRobinChangeProbe(_Strategy):
    name = "rrch"

    def __init__(self, theta=0.5, beta=0.8, seed=0):
        self.theta = theta
        self.beta = beta
        self.seed = seed

    def reset(self, n_vertices, random_state=None):
        super().reset(n_vertices, random_state)
        self.record_ = RoundRobinRecord.empty(n_vertices)
        return self

    def select(self, ctx):
        cfg = StrategyConfig(theta=self.theta, beta=self.beta, k=ctx.k)
        scores = change_scores(ctx.influence_past, ctx.last_pr, self.theta)
        chosen, self.record_ = select_rrch(scores, self.record_, cfg, self.rng_)
        return chosen


STRATEGIES = {cls.name: cls for cls in
              (NoProbe, RandomProbe, IndegreeProbe, PriorityProbe, ChangeProbe, RoundRobinChangeProbe)}


def make_strategy(name: str, **params) -> _Strategy:
    """Build a strategy by config name, ignoring parameters it does not take."""
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None
    accepted = cls._get_param_names()
    unknown = set(params) - {"theta", "beta", "seed", "label"}
    if unknown:
        raise ValueError(f"unknown strategy parameters for {name!r}: {sorted(unknown)}")
    return cls(**{k: v for k, v in params.items() if k in accepted})
