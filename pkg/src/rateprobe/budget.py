"""Rate-limit arithmetic: API windows to per-period probe capacity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int, check_unit_interval, round_half_up

__all__ = [
    "RateModel",
    "BudgetCheck",
    "relation_probe_cost",
    "tweet_probe_cost",
    "feasible_users",
    "days_needed",
    "capacity_to_k",
    "check_probe_budget",
]

MINUTES_PER_DAY = 1440


@dataclass(frozen=True)
class RateModel:
    rel_calls_per_window: int = 15
    tweet_calls_per_window: int = 180
    window_minutes: int = 15
    followers_per_call: int = 5000
    tweets_per_call: int = 200

    def __post_init__(self):
        for name in ("rel_calls_per_window", "tweet_calls_per_window", "window_minutes",
                     "followers_per_call", "tweets_per_call"):
            check_positive_int(getattr(self, name), name)

    def users_per_minute(self, kind: str) -> float:
        """Best-case users refreshed per minute (one call per user)."""
        if kind == "relations":
            return self.rel_calls_per_window / self.window_minutes
        if kind == "tweets":
            return self.tweet_calls_per_window / self.window_minutes
        raise ValueError(f"kind must be 'relations' or 'tweets', got {kind!r}")

    def calls_per_period(self, kind: str, period_days: float) -> int:
        per_window = self.rel_calls_per_window if kind == "relations" else self.tweet_calls_per_window
        return int(math.floor(period_days * MINUTES_PER_DAY / self.window_minutes)) * per_window


def relation_probe_cost(follower_count: int, friend_count: int, rates: RateModel = RateModel()) -> int:
    """Calls to fetch one user's followers and friends (an empty page still costs a call)."""
    if follower_count < 0 or friend_count < 0:
        raise ValueError("counts must be non-negative")
    per = rates.followers_per_call
    return math.ceil(max(1, follower_count) / per) + math.ceil(max(1, friend_count) / per)


def tweet_probe_cost(tweet_count: int, rates: RateModel = RateModel()) -> int:
    if tweet_count < 0:
        raise ValueError("tweet_count must be non-negative")
    return math.ceil(max(1, tweet_count) / rates.tweets_per_call)


def feasible_users(rates: RateModel, period_days: float, kind: str) -> int:
    """Users that can be fully refreshed within one period, best case."""
    if period_days <= 0:
        raise ValueError("period_days must be positive")
    return int(math.floor(rates.users_per_minute(kind) * period_days * MINUTES_PER_DAY + 1e-9))


def days_needed(rates: RateModel, n_users: int, kind: str) -> int:
    """Smallest whole number of days in which ``n_users`` can all be refreshed."""
    days = math.ceil(n_users / (rates.users_per_minute(kind) * MINUTES_PER_DAY))
    while feasible_users(rates, days, kind) < n_users:
        days += 1
    return days


def capacity_to_k(universe_size: int, capacity_fraction: float) -> int:
    """Probe-set size for a capacity given as a fraction of the network (half rounds up)."""
    check_unit_interval(capacity_fraction, "capacity fraction", open_low=True)
    return min(universe_size, max(1, round_half_up(capacity_fraction * universe_size)))


@dataclass
class BudgetCheck:
    ok: bool
    messages: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def check_probe_budget(k: int, period_days: float, rates: RateModel = RateModel(),
                       follower_counts=None, friend_counts=None,
                       tweet_k: int = 0, tweet_counts=None) -> BudgetCheck:
    """Validate a per-period probe load against the API windows.

    Without size metadata every user is assumed to cost the best case. With
    it, the ``k`` most expensive users are charged (the worst case a
    strategy could pick). Followers and friends use separate endpoints,
    each with its own window.
    """
    result = BudgetCheck(ok=True)
    rel_calls = rates.calls_per_period("relations", period_days)
    if follower_counts is None or friend_counts is None:
        need_f = need_g = k
    else:
        per = rates.followers_per_call
        f_cost = np.ceil(np.maximum(1, np.asarray(follower_counts)) / per)
        g_cost = np.ceil(np.maximum(1, np.asarray(friend_counts)) / per)
        need_f = int(np.sort(f_cost)[::-1][:k].sum())
        need_g = int(np.sort(g_cost)[::-1][:k].sum())
    for endpoint, need in (("followers", need_f), ("friends", need_g)):
        if need > rel_calls:
            result.ok = False
            result.messages.append(
                f"{endpoint} endpoint needs {need} calls per period but only {rel_calls} are available "
                f"(shortfall {need - rel_calls})")
    if tweet_k:
        twt_calls = rates.calls_per_period("tweets", period_days)
        if tweet_counts is None:
            need_t = tweet_k
        else:
            t_cost = np.ceil(np.maximum(1, np.asarray(tweet_counts)) / rates.tweets_per_call)
            need_t = int(np.sort(t_cost)[::-1][:tweet_k].sum())
        if need_t > twt_calls:
            result.ok = False
            result.messages.append(
                f"timeline endpoint needs {need_t} calls per period but only {twt_calls} are available "
                f"(shortfall {need_t - twt_calls})")
    if result.ok:
        result.messages.append(f"within budget: {max(need_f, need_g)} of {rel_calls} relation calls per period")
    return result
