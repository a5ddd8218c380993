import filecmp

import numpy as np
import pytest

from rateprobe.generator import (GenConfig, evolve, gen_dictionaries, gen_initial, gen_tweets, generate_dataset,
                                 load_dataset, write_dataset)
from rateprobe.topics import write_tweets


def test_initial_deterministic():
    cfg = GenConfig(n=10, m0=10, rng_seed=4)
    assert gen_initial(cfg) == gen_initial(cfg)
    assert gen_initial(cfg).n_edges == 10


def test_saturation():
    assert gen_initial(GenConfig(n=2, m0=2)).edge_set() == {(0, 1), (1, 0)}


def test_infeasible():
    with pytest.raises(ValueError):
        gen_initial(GenConfig(n=3, m0=7))
    with pytest.raises(ValueError):
        GenConfig(churn_add_frac=1.5)


@pytest.mark.parametrize("seed", range(5))
def test_in_degree_heavy_tail(seed):
    g = gen_initial(GenConfig(n=10_000, m0=100_000, rng_seed=seed))
    ind = np.sort(g.in_degree)[::-1]
    assert ind[:100].sum() >= 0.20 * ind.sum()


def test_no_churn_identical():
    cfg = GenConfig(n=300, m0=3000, churn_add_frac=0.0, churn_del_frac=0.0)
    g = gen_initial(cfg)
    h = evolve(g, cfg, 1)
    assert h.edge_set() == g.edge_set() and h.t == 1


def test_net_growth():
    cfg = GenConfig(n=2000, m0=20_000, churn_add_frac=0.05, churn_del_frac=0.03)
    g = gen_initial(cfg)
    h = evolve(g, cfg, 1)
    assert abs(h.n_edges - 1.02 * g.n_edges) <= 1
    assert not any(u == v for u, v in h.edges().tolist())


def test_evolve_requires_next_period():
    cfg = GenConfig(n=50, m0=200)
    with pytest.raises(ValueError):
        evolve(gen_initial(cfg), cfg, 2)


def test_sequence_deterministic():
    cfg = GenConfig(n=200, m0=1500, periods=3, rng_seed=9)
    a, b = generate_dataset(cfg), generate_dataset(cfg)
    assert all(x == y for x, y in zip(a.snapshots, b.snapshots))
    assert a.tweets == b.tweets


def test_inactive_users_silent():
    cfg = GenConfig(n=100, m0=500, inactive_frac=1.0)
    assert gen_tweets(gen_initial(cfg), cfg, 0) == []


def test_single_topic_users():
    cfg = GenConfig(n=200, m0=1000, single_topic_frac=1.0, rng_seed=2)
    dicts = gen_dictionaries(cfg)
    by_user = {}
    for tw in gen_tweets(gen_initial(cfg), cfg, 0, dicts):
        hits = {d.topic_id for d in dicts for w in tw.text.split() if w in d}
        assert len(hits) == 1
        by_user.setdefault(tw.author, set()).update(hits)
    assert by_user and all(len(s) == 1 for s in by_user.values())


def test_tweet_file_bytes(tmp_path):
    cfg = GenConfig(n=100, m0=600, rng_seed=1)
    g = gen_initial(cfg)
    write_tweets(tmp_path / "a.tsv", gen_tweets(g, cfg, 0))
    write_tweets(tmp_path / "b.tsv", gen_tweets(g, cfg, 0))
    assert filecmp.cmp(tmp_path / "a.tsv", tmp_path / "b.tsv", shallow=False)


def test_dataset_roundtrip(tmp_path):
    ds = generate_dataset(GenConfig(n=60, m0=300, periods=2))
    write_dataset(ds, tmp_path)
    back = load_dataset(tmp_path)
    assert back.periods == 2 and back.n == 60
    assert all(x == y for x, y in zip(ds.snapshots, back.snapshots))
    assert back.dictionaries == ds.dictionaries and back.tweets == ds.tweets
    assert load_dataset(tmp_path, periods=1).periods == 1


def test_missing_snapshot(tmp_path):
    write_dataset(generate_dataset(GenConfig(n=20, m0=40, periods=1), with_tweets=False), tmp_path)
    with pytest.raises(FileNotFoundError, match="snapshot_2.tsv"):
        load_dataset(tmp_path, periods=2)
