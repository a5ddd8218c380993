"""Experiment orchestration: config, the per-period simulation loop, sweeps.

A *cell* is one (seed, strategy, capacity) combination. Each cell starts
from a full observation of the period-0 network and then, for every later
period, selects probes, refreshes the local copy against ground truth,
optionally infers unseen edges, re-ranks and scores the estimate.
"""

from __future__ import annotations

import copy
import itertools
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from ._validation import check_damping, check_unit_interval, make_rng
from .budget import RateModel, capacity_to_k, check_probe_budget
from .generator import Dataset, GenConfig, generate_dataset, load_dataset
from .graph import LocalGraph, Snapshot, probe_update
from .inference import (DEFAULT_FILTER_MIN_OUT, GrowthState, estimate_organic_delta, infer_edges,
                        ra_scores, realized_precision, sample_non_edges, update_growth, write_inferred)
from .metrics import PeriodReport, edge_rates, jaccard_topk, kendall_tau_b, mse, summarize, write_reports, write_summary
from .probing import InfluencePast, ProbeContext, RoundRobinRecord, StrategyConfig, make_strategy, select_random
from .rank import DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_MAX_ITER, RankVector, pagerank, write_ranks
from .topics import DEFAULT_RELEVANCE, MODES, KeywordExtractor, TopicInfluence, TweetStore, select_tweet_probe

__all__ = [
    "StrategySpec",
    "InferenceSettings",
    "TopicSettings",
    "BudgetSettings",
    "ExperimentConfig",
    "BudgetError",
    "PeriodState",
    "GroundTruth",
    "RunResult",
    "load_truth",
    "validate_budget",
    "expand_grid",
    "simulate_cell",
    "run_cell",
    "run_experiment",
    "sweep",
    "DEFAULT_GRID",
]

log = logging.getLogger(__name__)

THETA_STRATEGIES = {"change", "rrch", "indegree"}
DEFAULT_GRID = {"theta": (0.0, 0.5, 1.0), "beta": (0.4, 0.6, 0.8), "capacity": (1e-5, 1e-4, 1e-3, 1e-2)}


class BudgetError(ValueError):
    """A configuration asks for more probes than the rate limits allow."""


@dataclass(frozen=True)
class StrategySpec:
    name: str
    theta: float = 0.5
    beta: float = 0.8
    seed: int = 0
    label: str | None = None

    def __post_init__(self):
        make_strategy(self.name, theta=self.theta, beta=self.beta, seed=self.seed)

    @property
    def tag(self) -> str:
        return self.label or self.name

    def build(self):
        return make_strategy(self.name, theta=self.theta, beta=self.beta, seed=self.seed)


@dataclass(frozen=True)
class InferenceSettings:
    enabled: bool = False
    filter_min_out: int = DEFAULT_FILTER_MIN_OUT


@dataclass(frozen=True)
class TopicSettings:
    enabled: bool = False
    mode: str = "G-WG"
    relevance: float = DEFAULT_RELEVANCE

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"topics.mode must be one of {MODES}, got {self.mode!r}")
        check_unit_interval(self.relevance, "topics.relevance")


@dataclass(frozen=True)
class BudgetSettings:
    period_days: float = 7.0
    rates: RateModel = field(default_factory=RateModel)


def _build(cls, raw, section: str):
    if raw is None:
        return cls()
    if isinstance(raw, cls):
        return raw
    if not isinstance(raw, dict):
        raise ValueError(f"config section {section!r} must be a mapping")
    names = set(cls.__dataclass_fields__)
    unknown = set(raw) - names
    if unknown:
        raise ValueError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return cls(**raw)


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment's output bytes.

    ``data`` is either ``{"path": dir}`` (snapshot files) or
    ``{"generate": {...GenConfig fields}}``. For generated data each seed
    yields its own dataset (the seed becomes the generator seed); for file
    data the seed only drives strategy randomness.
    """

    data: dict = field(default_factory=lambda: {"generate": {}})
    periods: int | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    strategies: list[StrategySpec] = field(default_factory=lambda: [StrategySpec("rrch")])
    capacities: list[float] = field(default_factory=lambda: [0.01])
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON
    max_iter: int = DEFAULT_MAX_ITER
    inference: InferenceSettings = field(default_factory=InferenceSettings)
    topics: TopicSettings = field(default_factory=TopicSettings)
    budget: BudgetSettings = field(default_factory=BudgetSettings)
    output: str = "results"
    write_ranks: bool = False

    def __post_init__(self):
        if not isinstance(self.data, dict) or len(set(self.data) & {"path", "generate"}) != 1:
            raise ValueError("data must name exactly one of 'path' or 'generate'")
        if set(self.data) - {"path", "generate"}:
            raise ValueError(f"unknown keys in 'data': {sorted(set(self.data) - {'path', 'generate'})}")
        self.strategies = [s if isinstance(s, StrategySpec) else _build(StrategySpec, s, "strategies")
                           for s in self.strategies]
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        tags = [s.tag for s in self.strategies]
        if len(set(tags)) != len(tags):
            raise ValueError(f"strategy labels must be unique, got {tags}")
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ValueError("at least one seed is required")
        self.capacities = [check_unit_interval(float(c), "capacity", open_low=True) for c in self.capacities]
        if not self.capacities:
            raise ValueError("at least one capacity is required")
        check_damping(self.alpha)
        if self.periods is not None and self.periods < 1:
            raise ValueError("periods must be at least 1")
        self.inference = _build(InferenceSettings, self.inference, "inference")
        self.topics = _build(TopicSettings, self.topics, "topics")
        if isinstance(self.budget, dict):
            raw = dict(self.budget)
            rates = _build(RateModel, raw.pop("rates", None), "budget.rates")
            self.budget = _build(BudgetSettings, dict(raw, rates=rates), "budget")
        if self.budget.period_days <= 0:
            raise ValueError("budget.period_days must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ValueError("config must be a mapping")
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(raw))

    @classmethod
    def from_yaml(cls, path: str | os.PathLike) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        return cls.from_dict(yaml.safe_load(path.read_text()) or {})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["budget"]["rates"] = asdict(self.budget.rates)
        return d

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seeds=[int(seed)])


# ---------------------------------------------------------------------------
# ground truth


class _MemoExtractor(KeywordExtractor):
    """Keyword extraction with a per-text cache; tweets recur across periods."""

    def __init__(self):
        super().__init__()
        self._cache: dict[str, Counter] = {}

    def __call__(self, text):
        hit = self._cache.get(text)
        if hit is None:
            hit = self._cache[text] = super().__call__(text)
        return hit


@dataclass(eq=False)
class GroundTruth:
    """A dataset plus lazily computed true rankings, shared read-only by cells."""

    dataset: Dataset
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON
    max_iter: int = DEFAULT_MAX_ITER
    relevance: float = DEFAULT_RELEVANCE

    def __post_init__(self):
        self._ranks: dict[int, RankVector] = {}
        self._topic: dict[tuple[int, int], TopicInfluence] = {}
        self.extractor = _MemoExtractor()

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def periods(self) -> int:
        return self.dataset.periods

    def snapshot(self, t: int) -> Snapshot:
        return self.dataset.snapshots[t]

    def rank(self, t: int) -> RankVector:
        if t not in self._ranks:
            g = self.snapshot(t)
            same = t > 0 and self.snapshot(t - 1).keys is g.keys and (t - 1) in self._ranks
            self._ranks[t] = self._ranks[t - 1] if same else pagerank(g, self.alpha, self.epsilon, self.max_iter)
        return self._ranks[t]

    def tweets(self, t: int) -> TweetStore:
        return self.dataset.tweet_stores[t]

    def topic(self, t: int, j: int) -> TopicInfluence:
        key = (t, j)
        if key not in self._topic:
            d = self.dataset.dictionaries[j]
            self._topic[key] = TopicInfluence(d, self.relevance, self.alpha, self.epsilon, self.max_iter).fit(
                self.snapshot(t), self.tweets(t), self.extractor)
        return self._topic[key]


def load_truth(cfg: ExperimentConfig, seed: int) -> GroundTruth:
    """Ground truth for one seed: loaded from files or generated."""
    if "path" in cfg.data:
        ds = load_dataset(cfg.data["path"], cfg.periods)
        if cfg.periods is not None and ds.periods > cfg.periods:
            ds = _truncate(ds, cfg.periods)
    else:
        gen = dict(cfg.data["generate"] or {})
        gen["rng_seed"] = seed
        if cfg.periods is not None:
            gen["periods"] = cfg.periods
        ds = generate_dataset(GenConfig(**gen), with_tweets=cfg.topics.enabled)
    if cfg.topics.enabled and not ds.has_topics:
        raise ValueError("topics are enabled but the dataset has no tweets or dictionaries")
    return GroundTruth(ds, cfg.alpha, cfg.epsilon, cfg.max_iter, cfg.topics.relevance)


def _truncate(ds: Dataset, periods: int) -> Dataset:
    tweets = ds.tweets[:periods + 1] if ds.tweets is not None else None
    return Dataset(ds.snapshots[:periods + 1], tweets, ds.dictionaries, dict(ds.meta, periods=periods))


# ---------------------------------------------------------------------------
# budget


def validate_budget(cfg: ExperimentConfig, truth: GroundTruth) -> list[str]:
    """Raise ``BudgetError`` if any capacity overruns the per-period API budget.

    Relation probes are charged at worst case from the period-0 follower and
    friend counts. Topic runs add one tweet probe set per topic and, in
    WG-WG mode, the per-topic relation probes.
    """
    g0 = truth.snapshot(0)
    n_topics = len(truth.dataset.dictionaries) if cfg.topics.enabled else 0
    notes = []
    for c in cfg.capacities:
        k = capacity_to_k(truth.n, c)
        rel_k = k + (n_topics * max(1, k // max(n_topics, 1)) if cfg.topics.mode == "WG-WG" and n_topics else 0)
        rel_k = min(rel_k, truth.n)
        tweet_counts = None
        if n_topics:
            tweet_counts = np.bincount([tw.author for tw in truth.dataset.tweets[0]], minlength=truth.n)
        res = check_probe_budget(rel_k, cfg.budget.period_days, cfg.budget.rates,
                                 follower_counts=g0.in_degree, friend_counts=g0.out_degree,
                                 tweet_k=min(truth.n, k) * n_topics, tweet_counts=tweet_counts)
        if not res.ok:
            raise BudgetError(f"capacity {c:g} (k={k}) is infeasible for period_days="
                              f"{cfg.budget.period_days:g}: " + "; ".join(res.messages))
        notes.extend(f"capacity {c:g} (k={k}): {m}" for m in res.messages)
    return notes


# ---------------------------------------------------------------------------
# the per-period loop


@dataclass
class PeriodState:
    """What one cell produced at period ``t``."""

    t: int
    probed: np.ndarray
    local: LocalGraph
    rank: RankVector
    reports: list[PeriodReport]
    inferred: np.ndarray
    candidates: object = None


def _rank_metrics(est, truth, est_pool=None, truth_pool=None) -> dict:
    return {
        "mse": mse(est, truth),
        "jaccard_10": jaccard_topk(est, truth, 10, est_pool, truth_pool),
        "jaccard_100": jaccard_topk(est, truth, 100, est_pool, truth_pool),
        "jaccard_1000": jaccard_topk(est, truth, 1000, est_pool, truth_pool),
        "kendall_tau_b": kendall_tau_b(est, truth),
    }


class _TopicTracker:
    """Per-cell topic state: a stale tweet copy, per-topic influence pasts and records."""

    def __init__(self, truth: GroundTruth, cfg: ExperimentConfig, spec: StrategySpec, k: int, rng, local0: LocalGraph):
        self.truth, self.cfg, self.spec, self.k = truth, cfg, spec, k
        self.rng = rng
        self.topics = list(range(len(truth.dataset.dictionaries)))
        self.store = truth.tweets(0)
        self.k_rel = max(1, k // max(len(self.topics), 1))
        self.tips = {j: InfluencePast(truth.n) for j in self.topics}
        self.last_wpr = {}
        self.records = {j: RoundRobinRecord.empty(truth.n) for j in self.topics}
        self.rel_records = {j: RoundRobinRecord.empty(truth.n) for j in self.topics}
        self.locals = {j: local0 for j in self.topics}
        for j in self.topics:
            self._observe(j, local0.graph)

    def _observe(self, j, graph):
        est = TopicInfluence(self.truth.dataset.dictionaries[j], self.cfg.topics.relevance,
                             self.cfg.alpha, self.cfg.epsilon, self.cfg.max_iter).fit(graph, self.store,
                                                                                     self.truth.extractor)
        self.tips[j].append(est.scores_)
        self.last_wpr[j] = est.scores_
        return est

    def _tweet_probes(self) -> tuple[dict, dict]:
        name = self.spec.name
        if name == "noprobe":
            return {j: np.empty(0, np.int64) for j in self.topics}, {}
        if name == "random":
            tw = {j: select_random(self.truth.n, self.k, self.rng) for j in self.topics}
            rel = ({j: select_random(self.truth.n, self.k_rel, self.rng) for j in self.topics}
                   if self.cfg.topics.mode == "WG-WG" else {})
            return tw, rel
        # every other strategy follows change scores on topic influence; only rrch mixes in round-robin
        beta = self.spec.beta if name == "rrch" else 1.0
        plan = select_tweet_probe(self.cfg.topics.mode, self.tips, self.last_wpr,
                                  StrategyConfig(theta=self.spec.theta if name in THETA_STRATEGIES else 0.5,
                                                 beta=beta, k=self.k),
                                  self.records, self.rng, self.rel_records, self.k_rel)
        self.records.update(plan.tweet_records)
        self.rel_records.update(plan.relation_records)
        return plan.tweet_probes, plan.relation_probes

    def step(self, t: int, global_local: LocalGraph, base: dict) -> list[PeriodReport]:
        for j in self.topics:
            assert len(self.tips[j]) == t, "topic influence past must hold only earlier periods"
        tweet_probes, rel_probes = self._tweet_probes()
        union = np.unique(np.concatenate([tweet_probes[j] for j in self.topics])) if self.topics else []
        self.store = self.store.probe_update(self.truth.tweets(t), union)
        truth_g = self.truth.snapshot(t)
        rows = []
        for j in self.topics:
            if self.cfg.topics.mode == "WG-WG":
                self.locals[j], _ = probe_update(self.locals[j], truth_g, rel_probes.get(j, []), t)
                graph = self.locals[j].graph
            else:
                graph = global_local.graph
            est = self._observe(j, graph)
            tru = self.truth.topic(t, j)
            fp, fn = edge_rates(graph, truth_g)
            m = _rank_metrics(est.scores_, tru.scores_, est.relevant_, tru.relevant_)
            rows.append(PeriodReport(**dict(base, target=f"topic:{j}", edge_fp_rate=fp, edge_fn_rate=fn,
                                            n_probed=int(len(tweet_probes[j])),
                                            inference_precision=float("nan"),
                                            random_precision=float("nan"), **m)))
        return rows


def simulate_cell(truth: GroundTruth, spec: StrategySpec, capacity: float, seed: int,
                  cfg: ExperimentConfig | None = None):
    """Run one cell, yielding a ``PeriodState`` for each period ``t = 1..T``.

    Period 0 is a full observation. Each period's selection sees influence
    values from earlier periods only.
    """
    cfg = cfg or ExperimentConfig()
    n = truth.n
    k = capacity_to_k(n, capacity)
    strategy = spec.build().reset(n, random_state=make_rng(spec.seed, "cell", seed, spec.tag))
    aux_rng = make_rng(spec.seed, "aux", seed, spec.tag)

    local = LocalGraph.from_snapshot(truth.snapshot(0))
    pr = pagerank(local.graph, cfg.alpha, cfg.epsilon, cfg.max_iter)
    ip, dp = InfluencePast(n), InfluencePast(n)
    ip.append(pr.scores)
    dp.append(local.graph.in_degree)
    growth = GrowthState()
    topics = None
    if cfg.topics.enabled:
        topics = _TopicTracker(truth, cfg, spec, k, make_rng(spec.seed, "topics", seed, spec.tag), local)

    for t in range(1, truth.periods + 1):
        assert len(ip) == t and len(dp) == t, "influence past must hold only earlier periods"
        ctx = ProbeContext(t=t, k=k, local=local.graph, influence_past=ip, degree_past=dp, last_pr=pr.scores)
        probed = np.asarray(strategy.select(ctx), dtype=np.int64)
        truth_g = truth.snapshot(t)
        before = local
        local, _ = probe_update(local, truth_g, probed, t)

        inferred = np.empty((0, 2), dtype=np.int64)
        candidates = None
        prec = rand_prec = float("nan")
        if cfg.inference.enabled:
            # the budget comes from earlier periods only, so the first period infers nothing
            e_g = growth.estimate
            growth = update_growth(growth, estimate_organic_delta(before, truth_g, probed, t))
            if e_g > 0:
                candidates = ra_scores(local.graph, cfg.inference.filter_min_out, limit=e_g,
                                       skip=local.last_probed == t)
                local, inferred = infer_edges(local, candidates, e_g)
                if len(inferred):
                    prec = realized_precision(inferred, truth_g)
                    rand_prec = realized_precision(sample_non_edges(before.graph, len(inferred), aux_rng), truth_g)

        pr = pagerank(local.graph, cfg.alpha, cfg.epsilon, cfg.max_iter)
        ip.append(pr.scores)
        dp.append(local.graph.in_degree)

        fp, fn = edge_rates(local.graph, truth_g)
        base = dict(strategy=spec.tag, theta=float(spec.theta), beta=float(spec.beta), seed=int(seed),
                    capacity=float(capacity), k=int(k), t=int(t), alpha=float(cfg.alpha),
                    n_inferred=int(len(inferred)))
        rows = [PeriodReport(**dict(base, target="global", edge_fp_rate=fp, edge_fn_rate=fn,
                                    n_probed=int(probed.size), inference_precision=prec,
                                    random_precision=rand_prec, **_rank_metrics(pr, truth.rank(t))))]
        if topics is not None:
            rows.extend(topics.step(t, local, base))
        yield PeriodState(t=t, probed=probed, local=local, rank=pr, reports=rows,
                          inferred=inferred, candidates=candidates)


def _cell_dir(out: Path, spec: StrategySpec, capacity: float, seed: int) -> Path:
    return out / f"{spec.tag}_cap{capacity:g}_seed{seed}"


def run_cell(truth: GroundTruth, spec: StrategySpec, capacity: float, seed: int,
             cfg: ExperimentConfig, out: Path | None = None) -> list[PeriodReport]:
    rows = []
    cell_out = _cell_dir(out, spec, capacity, seed) if out is not None else None
    for state in simulate_cell(truth, spec, capacity, seed, cfg):
        rows.extend(state.reports)
        if cell_out is None:
            continue
        if cfg.inference.enabled:
            cell_out.mkdir(parents=True, exist_ok=True)
            write_inferred(cell_out / f"inferred_{state.t}.tsv", state.inferred,
                           state.candidates if state.candidates is not None else _NO_CANDIDATES)
        if cfg.write_ranks:
            cell_out.mkdir(parents=True, exist_ok=True)
            write_ranks(state.rank, cell_out / f"ranks_{spec.tag}_{state.t}.csv")
    log.info("cell %s cap=%g seed=%d done", spec.tag, capacity, seed)
    return rows


class _Empty:
    u = v = np.empty(0, dtype=np.int64)
    ra = np.empty(0)


_NO_CANDIDATES = _Empty()


def _run_seed(cfg: ExperimentConfig, seed: int, cells, out: Path | None) -> list[PeriodReport]:
    truth = load_truth(cfg, seed)
    validate_budget(cfg, truth)
    rows = []
    for spec, capacity in cells:
        rows.extend(run_cell(truth, spec, capacity, seed, cfg, out))
    return rows


def _cells(cfg: ExperimentConfig):
    return [(spec, c) for spec in cfg.strategies for c in cfg.capacities]


def _execute(cfg: ExperimentConfig, out: Path | None, workers: int) -> list[PeriodReport]:
    cells = _cells(cfg)
    if workers > 1 and len(cfg.seeds) * len(cells) > 1:
        jobs = [(cfg, seed, [cell], out) for seed in cfg.seeds for cell in cells]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_job, jobs))
    else:
        parts = [_run_seed(cfg, seed, cells, out) for seed in cfg.seeds]
    # fixed row order regardless of how cells were scheduled
    rows = list(itertools.chain.from_iterable(parts))
    order = {(s.tag, c): i for i, (s, c) in enumerate(cells)}
    seed_pos = {s: i for i, s in enumerate(cfg.seeds)}
    rows.sort(key=lambda r: (seed_pos[r.seed], order[(r.strategy, r.capacity)], r.t))
    return rows


def _run_job(job):
    cfg, seed, cells, out = job
    return _run_seed(cfg, seed, cells, out)


@dataclass
class RunResult:
    reports: list[PeriodReport]
    summary: list[dict]
    output: Path | None


def run_experiment(cfg: ExperimentConfig, output: str | os.PathLike | None = None,
                   workers: int = 1, write: bool = True) -> RunResult:
    """Run every (seed, strategy, capacity) cell; write ``report.csv`` and ``summary.csv``."""
    out = Path(output if output is not None else cfg.output) if write else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rows = _execute(cfg, out, workers)
    summary = summarize(rows)
    if out is not None:
        write_reports(out / "report.csv", rows)
        write_summary(out / "summary.csv", summary)
    return RunResult(rows, summary, out)


def expand_grid(cfg: ExperimentConfig, thetas=None, betas=None, capacities=None) -> ExperimentConfig:
    """Cross the configured strategies with a theta/beta/capacity grid.

    Theta varies only for strategies that use it, beta only for rrch.
    ``None`` keeps the configured value.
    """
    specs = []
    for s in cfg.strategies:
        ths = thetas if (thetas is not None and s.name in THETA_STRATEGIES) else [s.theta]
        bes = betas if (betas is not None and s.name == "rrch") else [s.beta]
        multi = len(ths) * len(bes) > 1
        for th, be in itertools.product(ths, bes):
            label = s.label
            if multi:
                label = f"{s.tag}_t{th:g}" + (f"_b{be:g}" if s.name == "rrch" else "")
            specs.append(replace(s, theta=float(th), beta=float(be), label=label))
    caps = list(capacities) if capacities is not None else cfg.capacities
    return replace(cfg, strategies=specs, capacities=caps)


def sweep(cfg: ExperimentConfig, thetas=None, betas=None, capacities=None,
          output: str | os.PathLike | None = None, workers: int = 1, write: bool = True) -> RunResult:
    """``run_experiment`` over the cross product of a parameter grid."""
    return run_experiment(expand_grid(cfg, thetas, betas, capacities), output, workers, write)
