"""Topic pipeline: keywords, dictionary scoring, RT-FAV mass, topic-weighted graphs.

A user's topic mass is its (max-normalised) dictionary hit rate times the
retweets plus favourites its tweets received, max-normalised again across
users. Every in-edge of a user carries that user's mass, and weighted
PageRank over the result gives topic influence.
"""

from __future__ import annotations

import json
import os
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_unit_interval, make_rng
from .graph import Snapshot
from .probing import InfluencePast, RoundRobinRecord, StrategyConfig, change_scores, select_rrch
from .rank import DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_MAX_ITER, RankVector, weighted_pagerank

__all__ = [
    "TweetRecord",
    "TopicDictionary",
    "TopicWeightedGraph",
    "TweetStore",
    "KeywordExtractor",
    "extract_keywords",
    "raw_topic_score",
    "rtfav_total",
    "max_normalize",
    "build_topic_graph",
    "relevance_filter",
    "topic_inputs",
    "select_tweet_probe",
    "TweetProbePlan",
    "TopicInfluence",
    "read_tweets",
    "write_tweets",
    "read_dictionaries",
    "write_dictionaries",
]

DEFAULT_RELEVANCE = 0.40
MODES = ("G-WG", "WG-WG")

# letters/digits plus combining marks, so decomposed accents stay inside a token
_TOKEN = re.compile(r"(?:[^\W_]|[\u0300-\u036f])+")


@dataclass(frozen=True)
class TweetRecord:
    author: int
    period: int
    rt_count: int
    fav_count: int
    text: str = ""

    def __post_init__(self):
        if self.rt_count < 0 or self.fav_count < 0:
            raise ValueError("retweet and favourite counts must be non-negative")


@dataclass(frozen=True)
class TopicDictionary:
    topic_id: int
    entries: Mapping[str, float]

    def __post_init__(self):
        bad = {w: x for w, x in self.entries.items() if not 0 < x <= 1}
        if bad:
            raise ValueError(f"dictionary weights must lie in (0, 1]: {list(bad.items())[:3]}")

    @classmethod
    def from_groups(cls, topic_id: int, groups: Mapping[float, Iterable[str]]) -> "TopicDictionary":
        """Build from expert word groups weighted on a 1..10 scale (max-normalised)."""
        top = max(groups)
        if top <= 0:
            raise ValueError("group weights must be positive")
        entries = {}
        for weight, words in groups.items():
            for w in words:
                if w in entries:
                    raise ValueError(f"keyword {w!r} appears in more than one group")
                entries[w] = weight / top
        return cls(topic_id, entries)

    def __contains__(self, word) -> bool:
        return word in self.entries

    def weight(self, word: str) -> float:
        return self.entries.get(word, 0.0)


class KeywordExtractor:
    """Lowercase, split into alphanumeric runs, drop stop words, optionally stem."""

    def __init__(self, stop_words: Iterable[str] = (), stemmer: Callable[[str], str] | None = None):
        self.stop_words = frozenset(stop_words)
        self.stemmer = stemmer

    def __call__(self, text: str) -> Counter:
        tokens = _TOKEN.findall(unicodedata.normalize("NFC", text.lower()))
        if self.stemmer is not None:
            tokens = [self.stemmer(t) for t in tokens]
        return Counter(t for t in tokens if t and t not in self.stop_words)


def extract_keywords(text: str, stop_words: Iterable[str] = (), stemmer=None) -> Counter:
    return KeywordExtractor(stop_words, stemmer)(text)


def raw_topic_score(hist: Mapping[str, int], d: TopicDictionary) -> float:
    """Dictionary-weighted hit rate of a keyword histogram, in ``[0, 1]``."""
    total = sum(hist.values())
    if total == 0:
        return 0.0
    return sum(c * d.weight(w) for w, c in hist.items()) / total


def rtfav_total(tweets: Iterable[TweetRecord]) -> int:
    return sum(t.rt_count + t.fav_count for t in tweets)


def max_normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    top = x.max() if x.size else 0.0
    return x / top if top > 0 else np.zeros_like(x)


@dataclass(frozen=True, eq=False)
class TopicWeightedGraph:
    graph: Snapshot
    weights: np.ndarray
    masses: np.ndarray
    topic_id: int

    def pagerank(self, alpha=DEFAULT_ALPHA, epsilon=DEFAULT_EPSILON, max_iter=DEFAULT_MAX_ITER) -> RankVector:
        return weighted_pagerank(self.graph, self.weights, alpha, epsilon, max_iter)


def build_topic_graph(g: Snapshot, raw_scores, rtfav, topic_id: int = 0) -> TopicWeightedGraph:
    """Attach each user's normalised topic mass to all of its in-edges.

    ``raw_scores`` and ``rtfav`` are per-user arrays (or mappings; missing
    users count as 0).
    """
    raw = _dense(raw_scores, g.n)
    tot = _dense(rtfav, g.n)
    masses = max_normalize(max_normalize(raw) * tot)
    return TopicWeightedGraph(graph=g, weights=masses[g.dst], masses=masses, topic_id=topic_id)


def _dense(values, n: int) -> np.ndarray:
    if isinstance(values, Mapping):
        out = np.zeros(n)
        for k, v in values.items():
            out[int(k)] = v
        return out
    out = np.asarray(values, dtype=np.float64)
    if out.shape != (n,):
        raise ValueError(f"expected {n} per-user values, got shape {out.shape}")
    return out


def relevance_filter(tweets: Sequence[TweetRecord], d: TopicDictionary, p: float = DEFAULT_RELEVANCE,
                     extractor: KeywordExtractor | None = None) -> bool:
    """Keep a user iff at least a fraction ``p`` of its tweets hit the dictionary."""
    p = check_unit_interval(p, "p")
    if not tweets:
        return False
    extractor = extractor or KeywordExtractor()
    related = sum(1 for tw in tweets if any(w in d for w in extractor(tw.text)))
    return related >= p * len(tweets) - 1e-9


class TweetStore:
    """Per-user tweet windows as currently known (ground truth or a stale copy)."""

    def __init__(self, n_vertices: int, by_user: Mapping[int, Sequence[TweetRecord]] | None = None):
        self.n = n_vertices
        self._by_user: dict[int, tuple[TweetRecord, ...]] = {
            int(u): tuple(ts) for u, ts in (by_user or {}).items() if ts}

    @classmethod
    def from_tweets(cls, n_vertices: int, tweets: Iterable[TweetRecord]) -> "TweetStore":
        by_user: dict[int, list[TweetRecord]] = {}
        for tw in tweets:
            if not 0 <= tw.author < n_vertices:
                raise ValueError(f"tweet author {tw.author} outside the vertex universe")
            by_user.setdefault(tw.author, []).append(tw)
        return cls(n_vertices, by_user)

    def tweets_of(self, u: int) -> tuple[TweetRecord, ...]:
        return self._by_user.get(int(u), ())

    def users(self) -> list[int]:
        return sorted(self._by_user)

    def probe_update(self, truth: "TweetStore", probed) -> "TweetStore":
        """Replace probed users' windows with ``truth``; everyone else keeps theirs."""
        merged = dict(self._by_user)
        for u in np.asarray(probed, dtype=np.int64).tolist():
            if not 0 <= u < self.n:
                raise ValueError(f"unknown vertex {u}")
            fresh = truth.tweets_of(u)
            if fresh:
                merged[u] = fresh
            else:
                merged.pop(u, None)
        return TweetStore(self.n, merged)

    def __len__(self) -> int:
        return sum(len(ts) for ts in self._by_user.values())


def topic_inputs(store: TweetStore, dictionary: TopicDictionary, extractor: KeywordExtractor | None = None,
                 relevance: float = DEFAULT_RELEVANCE):
    """Per-user raw topic score, RT-FAV total, and relevance-filter mask."""
    extractor = extractor or KeywordExtractor()
    raw = np.zeros(store.n)
    tot = np.zeros(store.n)
    keep = np.zeros(store.n, dtype=bool)
    for u in store.users():
        tweets = store.tweets_of(u)
        hists = [extractor(tw.text) for tw in tweets]
        merged = sum(hists, Counter())
        raw[u] = raw_topic_score(merged, dictionary)
        tot[u] = rtfav_total(tweets)
        related = sum(1 for h in hists if any(w in dictionary for w in h))
        keep[u] = related >= relevance * len(tweets) - 1e-9
    return raw, tot, keep


class TopicInfluence(BaseEstimator):
    """Estimator producing topic influence (weighted PageRank) from graph + tweets."""

    def __init__(self, dictionary: TopicDictionary | None = None, relevance=DEFAULT_RELEVANCE,
                 alpha=DEFAULT_ALPHA, epsilon=DEFAULT_EPSILON, max_iter=DEFAULT_MAX_ITER):
        self.dictionary = dictionary
        self.relevance = relevance
        self.alpha = alpha
        self.epsilon = epsilon
        self.max_iter = max_iter

    def fit(self, graph: Snapshot, store: TweetStore, extractor: KeywordExtractor | None = None):
        if self.dictionary is None:
            raise ValueError("TopicInfluence needs a dictionary")
        raw, tot, keep = topic_inputs(store, self.dictionary, extractor, self.relevance)
        self.topic_graph_ = build_topic_graph(graph, raw, tot, self.dictionary.topic_id)
        self.rank_ = self.topic_graph_.pagerank(self.alpha, self.epsilon, self.max_iter)
        self.scores_ = self.rank_.scores
        self.relevant_ = keep
        return self

    def ranked_users(self) -> np.ndarray:
        """Users passing the relevance filter, by descending topic influence."""
        ids = np.flatnonzero(self.relevant_)
        order = np.lexsort((ids, -self.scores_[ids]))
        return ids[order]


@dataclass
class TweetProbePlan:
    tweet_probes: dict[int, np.ndarray]
    relation_probes: dict[int, np.ndarray] = field(default_factory=dict)
    tweet_records: dict[int, RoundRobinRecord] = field(default_factory=dict)
    relation_records: dict[int, RoundRobinRecord] = field(default_factory=dict)


def select_tweet_probe(mode: str, tips: Mapping[int, InfluencePast], last_wpr: Mapping[int, np.ndarray],
                       cfg: StrategyConfig, rr: Mapping[int, RoundRobinRecord], rng,
                       rel_rr: Mapping[int, RoundRobinRecord] | None = None, k_rel: int | None = None) -> TweetProbePlan:
    """Per-topic round-robin-change probe sets driven by topic influence.

    The score for topic ``j`` mixes last weighted PageRank with the sigma of
    its topic influence past. In ``WG-WG`` mode each topic also picks its own
    ``k_rel`` relation probes (separate record) to evolve its own network.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    rng = make_rng(rng)
    plan = TweetProbePlan(tweet_probes={})
    for j in sorted(tips):
        scores = change_scores(tips[j], last_wpr[j], cfg.theta)
        plan.tweet_probes[j], plan.tweet_records[j] = select_rrch(scores, rr[j], cfg, rng)
        if mode == "WG-WG":
            if rel_rr is None or k_rel is None:
                raise ValueError("WG-WG mode needs relation records and k_rel")
            rel_cfg = StrategyConfig(theta=cfg.theta, beta=cfg.beta, k=k_rel)
            plan.relation_probes[j], plan.relation_records[j] = select_rrch(scores, rel_rr[j], rel_cfg, rng)
    return plan


TWEET_HEADER = "period\tauthor_id\trt_count\tfav_count\ttext"


def write_tweets(path: str | os.PathLike, tweets: Iterable[TweetRecord]) -> None:
    """Tab-separated, one tweet per line, text last (tabs/newlines in text become spaces)."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(TWEET_HEADER + "\n")
        for tw in tweets:
            text = re.sub(r"[\t\r\n]+", " ", tw.text)
            fh.write(f"{tw.period}\t{tw.author}\t{tw.rt_count}\t{tw.fav_count}\t{text}\n")


def read_tweets(path: str | os.PathLike) -> list[TweetRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != TWEET_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 4)
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields")
            period, author, rt, fav, text = parts
            out.append(TweetRecord(int(author), int(period), int(rt), int(fav), text))
    return out


def write_dictionaries(path: str | os.PathLike, dictionaries: Sequence[TopicDictionary]) -> None:
    payload = [{"topic_id": d.topic_id, "entries": dict(sorted(d.entries.items()))} for d in dictionaries]
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_dictionaries(path: str | os.PathLike) -> list[TopicDictionary]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [TopicDictionary(int(d["topic_id"]), {str(k): float(v) for k, v in d["entries"].items()})
            for d in payload]
