"""Deterministic synthetic evolving follower networks and tweet streams.

Also home to :class:`Dataset`, the in-memory ground truth the harness runs
against, whether it was generated here or loaded from files.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._validation import check_positive_int, check_unit_interval, make_rng, round_half_up
from .graph import Snapshot, read_snapshot, write_snapshot
from .topics import TopicDictionary, TweetRecord, read_dictionaries, read_tweets, write_dictionaries, write_tweets

__all__ = [
    "GenConfig",
    "Dataset",
    "gen_initial",
    "evolve",
    "gen_tweets",
    "gen_dictionaries",
    "generate_dataset",
    "write_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class GenConfig:
    n: int = 5000
    m0: int = 50000
    periods: int = 10
    churn_add_frac: float = 0.05
    churn_del_frac: float = 0.03
    volatility_frac: float = 0.05
    hot_boost: float = 4.0
    closure_frac: float = 0.5
    follow_sigma: float = 2.0
    topic_count: int = 4
    keywords_per_topic: int = 100
    filler_vocabulary: int = 2000
    mean_activity: float = 3.0
    inactive_frac: float = 0.1
    single_topic_frac: float = 0.3
    rng_seed: int = 0

    def __post_init__(self):
        check_positive_int(self.n, "n")
        check_positive_int(self.periods, "periods", allow_zero=True)
        check_positive_int(self.m0, "m0", allow_zero=True)
        for name in ("churn_add_frac", "churn_del_frac", "closure_frac", "volatility_frac", "inactive_frac",
                     "single_topic_frac"):
            check_unit_interval(getattr(self, name), name)
        if self.follow_sigma < 0:
            raise ValueError("follow_sigma must be non-negative")
        if self.hot_boost < 1:
            raise ValueError("hot_boost must be >= 1")
        check_positive_int(self.topic_count, "topic_count", allow_zero=True)

    def follow_propensity(self) -> np.ndarray:
        """Per-user tendency to follow others (lognormal, mean one)."""
        rng = make_rng(self.rng_seed, "propensity")
        return rng.lognormal(-0.5 * self.follow_sigma ** 2, self.follow_sigma, size=self.n)

    def hot_mask(self) -> np.ndarray:
        """The fixed set of volatile ("hot") users for this seed."""
        rng = make_rng(self.rng_seed, "hot")
        mask = np.zeros(self.n, dtype=bool)
        mask[rng.permutation(self.n)[:round_half_up(self.volatility_frac * self.n)]] = True
        return mask


def gen_initial(cfg: GenConfig) -> Snapshot:
    """Growing directed preferential attachment.

    Vertices arrive in random order and each links to already-present
    vertices chosen with probability ∝ in-degree + 1. Out-degrees are one
    plus a multinomial share of the remaining ``m0 - n`` edges in proportion
    to each user's follow propensity;
    edges an early arrival cannot place (too few predecessors) are placed
    at the end with uniform sources over the full vertex set.
    """
    n, m0 = cfg.n, cfg.m0
    if m0 < n:
        raise ValueError(f"m0={m0} must be at least n={n}")
    if m0 > n * (n - 1):
        raise ValueError(f"m0={m0} exceeds the {n * (n - 1)} possible directed edges")
    rng = make_rng(cfg.rng_seed, "initial")
    order = rng.permutation(n).tolist()
    prop = cfg.follow_propensity()
    counts = (1 + rng.multinomial(m0 - n, prop / prop.sum())).tolist()
    buf = iter(rng.random(4 * m0 + 64).tolist())

    def uniform() -> float:
        nonlocal buf
        try:
            return next(buf)
        except StopIteration:
            buf = iter(rng.random(m0 + 64).tolist())
            return next(buf)

    keys: set[int] = set()
    dst: list[int] = []
    out_nb: list[set[int]] = [set() for _ in range(n)]

    def attach(s: int, pool: list[int]) -> None:
        for _ in range(64):
            e = len(dst)
            if uniform() * (len(pool) + e) < len(pool):
                target = pool[int(uniform() * len(pool))]
            else:
                target = dst[int(uniform() * e)]
            if target != s and s * n + target not in keys:
                break
        else:
            free = [x for x in pool if x != s and x not in out_nb[s]]
            target = free[int(uniform() * len(free))]
        keys.add(s * n + target)
        out_nb[s].add(target)
        dst.append(target)

    arrived: list[int] = []
    leftover = 0
    for i, s in enumerate(order):
        placed = min(counts[i], i)
        leftover += counts[i] - placed
        for _ in range(placed):
            attach(s, arrived)
        arrived.append(s)
    everyone = list(range(n))
    for _ in range(leftover):
        s = int(uniform() * n)
        while len(out_nb[s]) >= n - 1:
            s = (s + 1) % n
        attach(s, everyone)
    return Snapshot(n=n, keys=np.fromiter(sorted(keys), dtype=np.int64, count=len(keys)), t=0)


def _draw_new_edges(existing: np.ndarray, n: int, count: int, src_p: np.ndarray, dst_p: np.ndarray, rng) -> np.ndarray:
    found = np.empty(0, dtype=np.int64)
    for _ in range(1000):
        deficit = count - found.size
        if deficit <= 0:
            break
        size = int(deficit * 1.25) + 16
        s = rng.choice(n, size=size, p=src_p)
        d = rng.choice(n, size=size, p=dst_p)
        k = s * n + d
        k = k[(s != d) & ~np.isin(k, existing) & ~np.isin(k, found)]
        _, first = np.unique(k, return_index=True)
        found = np.concatenate([found, k[np.sort(first)][:deficit]])
    return found


def _draw_closure_edges(existing: np.ndarray, n: int, count: int, src_p: np.ndarray, rng) -> np.ndarray:
    """Triadic closure: a follower ``u`` (drawn from ``src_p``) follows a
    neighbour of one of its neighbours, walking the undirected graph. For a
    given ``u`` a pair's chance grows with the sum of ``1/deg(w)`` over its
    common neighbours ``w``.
    """
    src, dst = existing // n, existing % n
    sym = sp.csr_matrix((np.ones(existing.size), (src, dst)), shape=(n, n))
    sym = ((sym + sym.T) > 0).tocsr()
    indptr, indices = sym.indptr, sym.indices
    deg = np.diff(indptr)
    found = np.empty(0, dtype=np.int64)
    for _ in range(1000):
        deficit = count - found.size
        if deficit <= 0:
            break
        size = int(deficit * 1.5) + 16
        u = rng.choice(n, size=size, p=src_p)
        u = u[deg[u] > 0]
        w = indices[indptr[u] + (rng.random(u.size) * deg[u]).astype(np.int64)]
        v = indices[indptr[w] + (rng.random(w.size) * deg[w]).astype(np.int64)]
        k = u.astype(np.int64) * n + v
        k = k[(u != v) & ~np.isin(k, existing) & ~np.isin(k, found)]
        _, first = np.unique(k, return_index=True)
        found = np.concatenate([found, k[np.sort(first)][:deficit]])
    return found


def evolve(prev: Snapshot, cfg: GenConfig, t: int) -> Snapshot:
    """One period of churn on ``prev``.

    Deletes ``churn_del_frac * |E|`` edges (those touching hot users are
    ``hot_boost`` times likelier) and adds ``churn_add_frac * |E|`` new
    edges: a ``closure_frac`` share by triadic closure, the rest
    preferential. New edges' sources follow each user's follow propensity,
    with hot users favoured by the same factor.
    """
    if t != prev.t + 1:
        raise ValueError(f"evolve expects t = prev.t + 1 = {prev.t + 1}, got {t}")
    rng = make_rng(cfg.rng_seed, "evolve", t)
    n, m = prev.n, prev.n_edges
    hot = cfg.hot_mask()
    n_del = min(m, round_half_up(cfg.churn_del_frac * m))
    n_add = round_half_up(cfg.churn_add_frac * m)
    keys = prev.keys
    if n_del:
        w = np.where(hot[prev.src] | hot[prev.dst], cfg.hot_boost, 1.0)
        drop = rng.choice(m, size=n_del, replace=False, p=w / w.sum())
        keys = np.delete(keys, drop)
    if n_add:
        n_add = min(n_add, n * (n - 1) - keys.size)
        src_w = cfg.follow_propensity() * np.where(hot, cfg.hot_boost, 1.0)
        src_p = src_w / src_w.sum()
        closed = _draw_closure_edges(keys, n, round_half_up(cfg.closure_frac * n_add), src_p, rng)
        keys = np.union1d(keys, closed)
        indeg = np.bincount(keys % n, minlength=n) + 1.0
        new = _draw_new_edges(keys, n, n_add - closed.size, src_p, indeg / indeg.sum(), rng)
        keys = np.union1d(keys, new)
    return Snapshot(n=n, keys=keys, t=t)


def gen_dictionaries(cfg: GenConfig) -> list[TopicDictionary]:
    """Synthetic topic dictionaries: ten word groups per topic with weights 1..10."""
    rng = make_rng(cfg.rng_seed, "dictionaries")
    out = []
    for j in range(cfg.topic_count):
        words = [f"t{j}k{i}" for i in range(cfg.keywords_per_topic)]
        groups = np.array_split(np.array(words)[rng.permutation(len(words))], 10)
        out.append(TopicDictionary.from_groups(j, {g + 1: sorted(grp.tolist()) for g, grp in enumerate(groups)}))
    return out


@dataclass(frozen=True, eq=False)
class _UserProfiles:
    activity: np.ndarray
    mixture: np.ndarray
    """Per-user probabilities over ``topic_count`` topics plus a final chatter column."""


def _profiles(cfg: GenConfig) -> _UserProfiles:
    rng = make_rng(cfg.rng_seed, "profiles")
    n, k = cfg.n, cfg.topic_count
    activity = cfg.mean_activity * rng.lognormal(-0.5, 1.0, size=n)
    activity[rng.random(n) < cfg.inactive_frac] = 0.0
    mixture = np.zeros((n, k + 1))
    primary = rng.integers(0, max(k, 1), size=n)
    single = rng.random(n) < cfg.single_topic_frac
    for u in range(n):
        if k == 0:
            mixture[u, 0] = 1.0
        elif single[u]:
            mixture[u, primary[u]] = 1.0
        else:
            alpha = np.full(k + 1, 0.3)
            alpha[primary[u]] = 2.0
            alpha[k] = 1.0
            mixture[u] = rng.dirichlet(alpha)
    return _UserProfiles(activity=activity, mixture=mixture)


def gen_tweets(snapshot: Snapshot, cfg: GenConfig, t: int,
               dictionaries: list[TopicDictionary] | None = None) -> list[TweetRecord]:
    """Tweets authored during period ``t``.

    Per-user counts follow a heavy-tailed activity level (hot users' activity
    swings from period to period); each tweet embeds 1-3 keywords of a topic
    drawn from the author's mixture, or is pure chatter. Retweet and
    favourite counts grow with the author's current in-degree.
    """
    dictionaries = dictionaries if dictionaries is not None else gen_dictionaries(cfg)
    vocab = [sorted(d.entries) for d in dictionaries]
    prof = _profiles(cfg)
    hot = cfg.hot_mask()
    rng = make_rng(cfg.rng_seed, "tweets", t)
    n, k = cfg.n, len(dictionaries)
    swing = np.exp(rng.normal(0.0, np.where(hot, 1.0, 0.2)))
    counts = rng.poisson(np.minimum(prof.activity * swing, 50.0))
    reach = (1.0 + snapshot.in_degree) ** 0.8
    tweets = []
    for u in np.flatnonzero(counts).tolist():
        mix = prof.mixture[u]
        for _ in range(int(counts[u])):
            topic = int(rng.choice(mix.size, p=mix))
            words = [f"w{int(x)}" for x in rng.zipf(1.5, size=int(rng.integers(2, 6))) % cfg.filler_vocabulary]
            if topic < k:
                words += [vocab[topic][int(i)] for i in rng.integers(0, len(vocab[topic]), size=int(rng.integers(1, 4)))]
                rng.shuffle(words)
            mu = reach[u] * rng.lognormal(-0.5, 1.0)
            tweets.append(TweetRecord(author=u, period=t, rt_count=int(rng.poisson(0.3 * mu)),
                                      fav_count=int(rng.poisson(0.6 * mu)), text=" ".join(words)))
    return tweets


@dataclass(eq=False)
class Dataset:
    """Ground truth for one experiment: snapshots ``0..T`` and optional tweets."""

    snapshots: list[Snapshot]
    tweets: list[list[TweetRecord]] | None = None
    dictionaries: list[TopicDictionary] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.snapshots:
            raise ValueError("dataset needs at least the t=0 snapshot")
        n = self.snapshots[0].n
        for t, g in enumerate(self.snapshots):
            if g.t != t:
                raise ValueError(f"snapshot at position {t} is labelled t={g.t}")
            if g.n != n:
                raise ValueError("all snapshots must share the vertex universe")
        if self.tweets is not None and len(self.tweets) != len(self.snapshots):
            raise ValueError("need one tweet list per snapshot")

    @property
    def n(self) -> int:
        return self.snapshots[0].n

    @property
    def periods(self) -> int:
        return len(self.snapshots) - 1

    @property
    def has_topics(self) -> bool:
        return self.tweets is not None and bool(self.dictionaries)

    @cached_property
    def tweet_stores(self):
        from .topics import TweetStore

        if self.tweets is None:
            return None
        return [TweetStore.from_tweets(self.n, tw) for tw in self.tweets]


def generate_dataset(cfg: GenConfig, with_tweets: bool = True) -> Dataset:
    snaps = [gen_initial(cfg)]
    for t in range(1, cfg.periods + 1):
        snaps.append(evolve(snaps[-1], cfg, t))
    tweets, dicts = None, []
    if with_tweets and cfg.topic_count:
        dicts = gen_dictionaries(cfg)
        tweets = [gen_tweets(g, cfg, g.t, dicts) for g in snaps]
    return Dataset(snapshots=snaps, tweets=tweets, dictionaries=dicts,
                   meta={"n": cfg.n, "periods": cfg.periods, "generator": asdict(cfg)})


def write_dataset(ds: Dataset, directory: str | os.PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for g in ds.snapshots:
        write_snapshot(g, directory)
    if ds.tweets is not None:
        for t, tw in enumerate(ds.tweets):
            write_tweets(directory / f"tweets_{t}.tsv", tw)
    if ds.dictionaries:
        write_dictionaries(directory / "dictionaries.json", ds.dictionaries)
    meta = dict(ds.meta, n=ds.n, periods=ds.periods)
    (directory / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return directory


def load_dataset(directory: str | os.PathLike, periods: int | None = None) -> Dataset:
    """Load ``snapshot_0..T.tsv`` (plus tweets and dictionaries when present).

    The vertex universe is ``meta.json``'s ``n`` when available, otherwise
    the largest id seen in any snapshot or vertices file, plus one.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    meta = {}
    if (directory / "meta.json").exists():
        meta = json.loads((directory / "meta.json").read_text())
    if periods is None:
        periods = meta.get("periods")
    if periods is None:
        periods = 0
        while (directory / f"snapshot_{periods + 1}.tsv").exists():
            periods += 1
    for t in range(periods + 1):
        if not (directory / f"snapshot_{t}.tsv").exists():
            raise FileNotFoundError(f"missing snapshot file: {directory / f'snapshot_{t}.tsv'}")
    n = meta.get("n")
    if n is None:
        n = max(read_snapshot(directory, t).n for t in range(periods + 1))
    snaps = [read_snapshot(directory, t, n=n) for t in range(periods + 1)]
    tweets = None
    if all((directory / f"tweets_{t}.tsv").exists() for t in range(periods + 1)):
        tweets = [read_tweets(directory / f"tweets_{t}.tsv") for t in range(periods + 1)]
    dicts = read_dictionaries(directory / "dictionaries.json") if (directory / "dictionaries.json").exists() else []
    return Dataset(snapshots=snaps, tweets=tweets, dictionaries=dicts, meta=meta)
