"""Deterministic point and query generators."""

from __future__ import annotations

import math

import numpy as np

from ..geometry import QueryBox, to_rank_space

DISTRIBUTIONS = ("uniform", "clustered", "diagonal")
SPAN = 10 ** 9


def generate_points(n: int, d: int, distribution: str = "uniform", seed: int = 0) -> np.ndarray:
    """(n, d) integer coordinates; diagonal points share one value across dimensions."""
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        return rng.integers(0, SPAN, size=(n, d), dtype=np.int64)
    if distribution == "clustered":
        k = max(1, min(16, n // 64 + 1))
        centers = rng.integers(0, SPAN, size=(k, d))
        which = rng.integers(0, k, size=n)
        pts = centers[which] + rng.normal(0, SPAN / 200, size=(n, d))
        return np.clip(np.rint(pts), 0, SPAN - 1).astype(np.int64)
    if distribution == "diagonal":
        v = rng.permutation(n).astype(np.int64) * 7 + 3
        return np.repeat(v[:, None], d, axis=1)
    raise ValueError(f"unknown distribution {distribution!r}")


def fixture(n: int, distribution: str, seed: int, d: int = 5):
    """Rank-space fixture used by the tests and the verify subcommand."""
    return to_rank_space(generate_points(n, d, distribution, seed))


def random_query(kind: str, n: int, d: int, rng) -> QueryBox:
    """Random rank-space query of type dom4, 5sided or box."""
    inf = math.inf
    if kind == "dom4":
        return QueryBox((-inf,) * d, tuple(float(v) for v in rng.integers(1, n + 1, d)))
    if kind == "5sided":
        a, b = sorted(rng.integers(1, n + 1, 2).tolist())
        ub = tuple(float(v) for v in rng.integers(1, n + 1, d - 1))
        return QueryBox((float(a),) + (-inf,) * (d - 1), (float(b),) + ub)
    if kind == "box":
        a = rng.integers(1, n + 1, d)
        b = rng.integers(1, n + 1, d)
        return QueryBox(tuple(float(v) for v in np.minimum(a, b)), tuple(float(v) for v in np.maximum(a, b)))
    raise ValueError(f"unknown query kind {kind!r}")


def random_queries(kind: str, n: int, d: int, count: int, seed: int = 0) -> list[QueryBox]:
    rng = np.random.default_rng(seed)
    return [random_query(kind, max(n, 1), d, rng) for _ in range(count)]
