import pytest

from rateprobe.budget import (RateModel, capacity_to_k, check_probe_budget, days_needed, feasible_users,
                              relation_probe_cost, tweet_probe_cost)

R = RateModel()


@pytest.mark.parametrize("followers,friends,calls", [(100, 100, 2), (5001, 0, 3), (0, 0, 2)])
def test_relation_cost(followers, friends, calls):
    assert relation_probe_cost(followers, friends) == calls


def test_tweet_cost():
    assert tweet_probe_cost(0) == 1 and tweet_probe_cost(201) == 2


@pytest.mark.parametrize("kind,days,users", [("relations", 174, 250_560), ("tweets", 1, 17_280),
                                             ("relations", 1, 1_440)])
def test_feasible_users(kind, days, users):
    assert feasible_users(R, days, kind) == users


def test_days_needed():
    assert days_needed(R, 250_000, "relations") == 174
    assert feasible_users(R, 173, "relations") < 250_000


@pytest.mark.parametrize("size,frac,k", [(250_000, 0.01, 2_500), (250_000, 1e-5, 3), (1234, 1.0, 1234)])
def test_capacity_to_k(size, frac, k):
    assert capacity_to_k(size, frac) == k


def test_capacity_range():
    with pytest.raises(ValueError):
        capacity_to_k(10, 0.0)
    with pytest.raises(ValueError):
        capacity_to_k(10, 1.5)


def test_check_budget():
    ok = check_probe_budget(100, 1.0)
    assert ok and "within budget" in ok.messages[0]
    bad = check_probe_budget(2000, 1.0)
    assert not bad and "shortfall 560" in bad.messages[0]


def test_check_budget_worst_case_sizes():
    res = check_probe_budget(2, 1.0 / 96, RateModel(rel_calls_per_window=3), follower_counts=[12_000, 10, 10], friend_counts=[0, 0, 0])
    assert not res and "followers endpoint needs 4" in res.messages[0]


def test_tweet_window():
    assert not check_probe_budget(1, 1.0, tweet_k=20_000)


def test_bad_kind():
    with pytest.raises(ValueError):
        feasible_users(R, 1, "likes")
