"""Input validation helpers shared across the package."""

from __future__ import annotations

import math
import zlib

import numpy as np


def check_vertex_ids(ids, n_vertices: int, name: str = "vertex ids") -> np.ndarray:
    """Return ``ids`` as a sorted unique int64 array, raising on ids outside ``[0, n)``."""
    arr = np.unique(np.asarray(list(ids) if isinstance(ids, (set, frozenset)) else ids,
                               dtype=np.int64).ravel())
    if arr.size and (arr[0] < 0 or arr[-1] >= n_vertices):
        bad = arr[(arr < 0) | (arr >= n_vertices)]
        raise ValueError(f"unknown {name}: {bad[:5].tolist()} (universe size {n_vertices})")
    return arr


def check_unit_interval(value: float, name: str, *, open_low: bool = False) -> float:
    value = float(value)
    if not math.isfinite(value) or value > 1 or value < 0 or (open_low and value == 0):
        bound = "(0, 1]" if open_low else "[0, 1]"
        raise ValueError(f"{name} must lie in {bound}, got {value!r}")
    return value


def check_damping(alpha: float) -> float:
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha


def check_positive_int(value, name: str, *, allow_zero: bool = False) -> int:
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")
    return value


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stable_hash(*parts) -> int:
    """Process-independent 32-bit hash for seeding (``hash()`` is salted per process)."""
    return zlib.crc32("\x1f".join(map(str, parts)).encode())


def make_rng(seed, *salt) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [stable_hash(s) for s in salt]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def top_k_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores; ties go to the lower index."""
    scores = np.asarray(scores, dtype=float)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(scores.size), -scores))
    return order[:k].astype(np.int64)
