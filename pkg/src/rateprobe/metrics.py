"""Estimation-quality measures and the per-period report records."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.stats import kendalltau

from ._validation import top_k_indices
from .graph import Snapshot

__all__ = [
    "mse",
    "jaccard_topk",
    "kendall_tau_b",
    "edge_rates",
    "PeriodReport",
    "REPORT_COLUMNS",
    "write_reports",
    "summarize",
    "write_summary",
]


def _scores(x) -> np.ndarray:
    return np.asarray(getattr(x, "scores", x), dtype=np.float64)


def mse(est, truth) -> float:
    """Root of the mean squared score difference over the shared vertices.

    Named after the error measure it reports even though it takes the
    square root. Vertex sets are positional; the shorter vector bounds the
    overlap.
    """
    a, b = _scores(est), _scores(truth)
    m = min(a.size, b.size)
    if m == 0:
        raise ValueError("estimated and true score vectors share no vertices")
    d = a[:m] - b[:m]
    return float(math.sqrt(float(np.dot(d, d)) / m))


def jaccard_topk(est, truth, k: int, est_pool=None, truth_pool=None) -> float:
    """Jaccard similarity of the two top-``k`` sets (ties to the lower id).

    ``est_pool``/``truth_pool`` optionally restrict each ranking to a subset
    of eligible vertices (e.g. users passing a relevance filter).
    """
    a = _topk(_scores(est), k, est_pool)
    b = _topk(_scores(truth), k, truth_pool)
    union = np.union1d(a, b)
    if union.size == 0:
        return 1.0
    return float(np.intersect1d(a, b).size / union.size)


def _topk(scores: np.ndarray, k: int, pool) -> np.ndarray:
    if pool is None:
        return top_k_indices(scores, min(k, scores.size))
    ids = np.flatnonzero(np.asarray(pool, dtype=bool)) if np.asarray(pool).dtype == bool else np.asarray(pool)
    return ids[top_k_indices(scores[ids], min(k, ids.size))]


def kendall_tau_b(est, truth, over=None) -> float:
    """Kendall tau-b between the score-induced rankings, restricted to ``over``.

    Defined as 0 when either side is entirely tied.
    """
    a, b = _scores(est), _scores(truth)
    if over is not None:
        idx = np.asarray(over, dtype=np.int64)
        a, b = a[idx], b[idx]
    if a.size < 2:
        raise ValueError("Kendall tau-b needs at least two items")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return 0.0
    tau = kendalltau(a, b, variant="b").statistic
    return 0.0 if math.isnan(tau) else float(tau)


def edge_rates(est: Snapshot, truth: Snapshot) -> tuple[float, float]:
    """False-positive and false-negative edge rates, both relative to ``|E_truth|``."""
    if est.n != truth.n:
        raise ValueError("graphs must share a vertex universe")
    if truth.n_edges == 0:
        raise ValueError("truth graph has no edges")
    fp = np.setdiff1d(est.keys, truth.keys, assume_unique=True).size
    fn = np.setdiff1d(truth.keys, est.keys, assume_unique=True).size
    return fp / truth.n_edges, fn / truth.n_edges


@dataclass
class PeriodReport:
    strategy: str
    theta: float
    beta: float
    seed: int
    capacity: float
    k: int
    target: str
    t: int
    alpha: float
    mse: float
    jaccard_10: float
    jaccard_100: float
    jaccard_1000: float
    kendall_tau_b: float
    edge_fp_rate: float
    edge_fn_rate: float
    n_probed: int
    n_inferred: int
    inference_precision: float
    random_precision: float

    def __post_init__(self):
        for name in ("jaccard_10", "jaccard_100", "jaccard_1000", "edge_fp_rate", "edge_fn_rate"):
            x = getattr(self, name)
            if not (math.isnan(x) or 0 <= x <= 1 + 1e-12):
                raise ValueError(f"{name}={x} outside [0, 1]")
        if not (math.isnan(self.kendall_tau_b) or -1 - 1e-12 <= self.kendall_tau_b <= 1 + 1e-12):
            raise ValueError(f"kendall_tau_b={self.kendall_tau_b} outside [-1, 1]")


REPORT_COLUMNS = [f.name for f in fields(PeriodReport)]
METRIC_COLUMNS = ["mse", "jaccard_10", "jaccard_100", "jaccard_1000", "kendall_tau_b",
                  "edge_fp_rate", "edge_fn_rate", "inference_precision", "random_precision"]
GROUP_COLUMNS = ["strategy", "theta", "beta", "capacity", "target"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.17g}"
    return str(x)


def write_reports(path: str | os.PathLike, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            row = asdict(r)
            w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])


def summarize(rows) -> list[dict]:
    """Mean and population std of every metric per (strategy, theta, beta, capacity, target).

    ``rows`` are ``PeriodReport`` objects or dicts with the report columns.
    Groups appear in first-seen order.
    """
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        d = asdict(r) if isinstance(r, PeriodReport) else r
        key = tuple(d[c] for c in GROUP_COLUMNS)
        groups.setdefault(key, []).append(d)
    out = []
    for key, members in groups.items():
        rec = dict(zip(GROUP_COLUMNS, key))
        rec["n_rows"] = len(members)
        for m in METRIC_COLUMNS:
            vals = np.array([float(x[m]) for x in members])
            vals = vals[~np.isnan(vals)]
            rec[f"{m}_mean"] = float(vals.mean()) if vals.size else float("nan")
            rec[f"{m}_std"] = float(vals.std()) if vals.size else float("nan")
        out.append(rec)
    return out


SUMMARY_COLUMNS = GROUP_COLUMNS + ["n_rows"] + [f"{m}_{s}" for m in METRIC_COLUMNS for s in ("mean", "std")]


def write_summary(target, summary: list[dict]) -> None:
    """Write the summary table to a path or an open text stream."""
    if hasattr(target, "write"):
        _summary_rows(target, summary)
        return
    with open(target, "w", newline="") as fh:
        _summary_rows(fh, summary)


def _summary_rows(fh, summary) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for rec in summary:
        w.writerow([_fmt(rec[c]) for c in SUMMARY_COLUMNS])
