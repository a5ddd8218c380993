import math

import numpy as np
import pytest

from rateprobe.generator import Dataset, GenConfig, gen_initial, generate_dataset, write_dataset
from rateprobe.harness import (DEFAULT_GRID, BudgetError, ExperimentConfig, GroundTruth, StrategySpec, expand_grid,
                               load_truth, run_experiment, simulate_cell, sweep, validate_budget)

SMALL = {"generate": {"n": 300, "m0": 2400}}


def cfg(**kw):
    base = dict(data=SMALL, periods=3, seeds=[0], strategies=[{"name": "rrch"}], capacities=[0.05])
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_noprobe_on_static_truth():
    g0 = gen_initial(GenConfig(n=200, m0=1500))
    truth = GroundTruth(Dataset([g0.with_period(t) for t in range(4)]))
    states = list(simulate_cell(truth, StrategySpec("noprobe"), 0.01, 0))
    assert [s.t for s in states] == [1, 2, 3]
    assert all(s.reports[0].mse == 0 and s.reports[0].jaccard_100 == 1 for s in states)


def test_full_capacity_matches_truth():
    truth = load_truth(cfg(), 0)
    for s in simulate_cell(truth, StrategySpec("random"), 1.0, 0):
        assert s.local.graph == truth.snapshot(s.t)
        assert s.reports[0].mse == 0 and s.reports[0].edge_fn_rate == 0


def test_probe_counts():
    truth = load_truth(cfg(), 0)
    for s in simulate_cell(truth, StrategySpec("rrch"), 0.05, 0):
        assert s.probed.size == 15 and np.unique(s.probed).size == 15


def test_inference_rows():
    c = cfg(inference={"enabled": True, "filter_min_out": 2}, periods=4)
    truth = load_truth(c, 0)
    states = list(simulate_cell(truth, StrategySpec("rrch"), 0.05, 0, c))
    assert math.isnan(states[0].reports[0].inference_precision)
    assert any(s.reports[0].n_inferred > 0 for s in states[1:])
    for s in states:
        assert s.reports[0].n_inferred == len(s.inferred)


def test_topic_rows():
    c = cfg(topics={"enabled": True})
    rows = run_experiment(c, write=False).reports
    targets = sorted({r.target for r in rows})
    assert targets == ["global", "topic:0", "topic:1", "topic:2", "topic:3"]


def test_wgwg_runs():
    c = cfg(topics={"enabled": True, "mode": "WG-WG"}, periods=2)
    assert len(run_experiment(c, write=False).reports) == 2 * 5


def test_deterministic(tmp_path):
    c = cfg(strategies=[{"name": "rrch"}, {"name": "random"}], inference={"enabled": True})
    run_experiment(c, tmp_path / "a")
    run_experiment(c, tmp_path / "b")
    assert (tmp_path / "a/report.csv").read_bytes() == (tmp_path / "b/report.csv").read_bytes()


def test_workers_same_bytes(tmp_path):
    c = cfg(strategies=[{"name": "rrch"}, {"name": "change"}], seeds=[0, 1])
    run_experiment(c, tmp_path / "a")
    run_experiment(c, tmp_path / "b", workers=2)
    assert (tmp_path / "a/report.csv").read_bytes() == (tmp_path / "b/report.csv").read_bytes()


def test_outputs_written(tmp_path):
    c = cfg(inference={"enabled": True}, write_ranks=True, periods=2)
    run_experiment(c, tmp_path)
    cell = tmp_path / "rrch_cap0.05_seed0"
    assert (cell / "inferred_2.tsv").read_text().startswith("u\tv\tra_score\n")
    assert (cell / "ranks_rrch_1.csv").exists()
    assert (tmp_path / "summary.csv").exists()


def test_grid_cardinality():
    c = cfg(strategies=[{"name": "change"}, {"name": "random"}])
    grid = expand_grid(c, thetas=[0.0, 0.5, 1.0])
    assert [s.tag for s in grid.strategies] == ["change_t0", "change_t0.5", "change_t1", "random"]
    res = sweep(c, thetas=[0.0, 0.5, 1.0], write=False)
    assert len([r for r in res.summary if r["strategy"].startswith("change")]) == 3


def test_default_grid_contains_defaults():
    assert 0.5 in DEFAULT_GRID["theta"] and 0.8 in DEFAULT_GRID["beta"]
    grid = expand_grid(cfg(), DEFAULT_GRID["theta"], DEFAULT_GRID["beta"], DEFAULT_GRID["capacity"])
    assert any(s.theta == 0.5 and s.beta == 0.8 for s in grid.strategies)
    assert len(grid.strategies) == 9 and len(grid.capacities) == 4


def test_no_lookahead():
    # a strategy that only ever sees past influence: perturbing the future leaves early choices intact
    ds = generate_dataset(GenConfig(n=300, m0=2400, periods=4), with_tweets=False)
    other = generate_dataset(GenConfig(n=300, m0=2400, periods=4, rng_seed=5), with_tweets=False)
    mixed = Dataset(ds.snapshots[:3] + [s.with_period(t) for t, s in enumerate(other.snapshots) if t >= 3])
    a = [s.probed for s in simulate_cell(GroundTruth(ds), StrategySpec("change"), 0.05, 0)]
    b = [s.probed for s in simulate_cell(GroundTruth(mixed), StrategySpec("change"), 0.05, 0)]
    for t in range(3):
        np.testing.assert_array_equal(a[t], b[t])


def test_budget_validation():
    c = cfg(budget={"period_days": 0.001})
    with pytest.raises(BudgetError, match="shortfall"):
        validate_budget(c, load_truth(c, 0))
    assert validate_budget(cfg(), load_truth(cfg(), 0))


def test_file_data_and_truncation(tmp_path):
    write_dataset(generate_dataset(GenConfig(n=100, m0=500, periods=4), with_tweets=False), tmp_path)
    truth = load_truth(cfg(data={"path": str(tmp_path)}, periods=2), 0)
    assert truth.periods == 2


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_dict({"bogus": 1})

    def test_unknown_section_key(self):
        with pytest.raises(ValueError):
            cfg(inference={"enable": True})

    def test_duplicate_labels(self):
        with pytest.raises(ValueError):
            cfg(strategies=[{"name": "rrch"}, {"name": "rrch"}])

    def test_bad_strategy(self):
        with pytest.raises(ValueError):
            cfg(strategies=[{"name": "psychic"}])

    def test_bad_capacity(self):
        with pytest.raises(ValueError):
            cfg(capacities=[0])

    def test_both_sources(self):
        with pytest.raises(ValueError):
            cfg(data={"path": "x", "generate": {}})

    def test_roundtrip(self):
        c = cfg(topics={"enabled": True, "mode": "WG-WG"})
        assert ExperimentConfig.from_dict(c.to_dict()) == c
