"""Points, query boxes and rank-space reduction.

All structures work on integer ranks 1..n per dimension.  Raw inputs are
reduced with a stable sort so equal raw values get consecutive ranks in
input order, which makes every coordinate distinct within a set.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NEG_INF = -math.inf
POS_INF = math.inf


class ContractError(ValueError):
    """Raised when an operation's precondition is violated."""


@dataclass(frozen=True)
class PointND:
    id: int
    coords: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.coords)


def dominates(p: Sequence[int], q: Sequence[int]) -> bool:
    """True iff p is strictly greater than q in every coordinate."""
    if len(p) != len(q):
        raise ContractError(f"arity mismatch: {len(p)} vs {len(q)}")
    return all(a > b for a, b in zip(p, q))


def cell_contains(apex: Sequence[int], q: Sequence[int]) -> bool:
    """Closed containment of q in the downward box anchored at apex."""
    if len(apex) != len(q):
        raise ContractError(f"arity mismatch: {len(apex)} vs {len(q)}")
    return all(b <= a for a, b in zip(apex, q))


@dataclass
class RankedPointSet:
    """Points in rank space.

    ``ranks`` is an (n, d) int64 array; row i belongs to point id i.
    ``rank_maps[j]`` holds the raw values of dimension j in sorted order, so
    ``rank_maps[j][r - 1]`` is the raw value of rank r.
    """

    ranks: np.ndarray
    rank_maps: list[np.ndarray] = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.ranks.shape[0])

    @property
    def dim(self) -> int:
        return int(self.ranks.shape[1])

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.int64)

    @property
    def points(self) -> list[PointND]:
        return [PointND(i, tuple(int(c) for c in row)) for i, row in enumerate(self.ranks)]

    def original(self, dim: int, rank: int) -> float:
        return self.rank_maps[dim][rank - 1].item()

    @classmethod
    def from_ranks(cls, ranks, check: bool = True) -> "RankedPointSet":
        arr = np.asarray(ranks, dtype=np.int64)
        if arr.ndim != 2:
            raise ContractError("ranks must be a 2D array")
        if check:
            n = arr.shape[0]
            for j in range(arr.shape[1]):
                if not np.array_equal(np.sort(arr[:, j]), np.arange(1, n + 1)):
                    raise ContractError(f"dimension {j} is not a permutation of 1..{n}")
        maps = [np.sort(arr[:, j]).astype(np.float64) for j in range(arr.shape[1])]
        return cls(arr, maps)


def to_rank_space(raw, dim: int | None = None) -> RankedPointSet:
    """Reduce raw coordinates to ranks with stable tie-breaking by input index."""
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size == 0:
        d = dim if dim is not None else (arr.shape[1] if arr.ndim == 2 else 0)
        return RankedPointSet(np.zeros((0, d), dtype=np.int64), [np.zeros(0) for _ in range(d)])
    if arr.ndim != 2:
        raise ContractError("raw points must be a 2D array")
    if np.isnan(arr).any():
        raise ContractError("NaN coordinates are not allowed")
    n, d = arr.shape
    ranks = np.empty((n, d), dtype=np.int64)
    maps = []
    for j in range(d):
        order = np.argsort(arr[:, j], kind="stable")
        ranks[order, j] = np.arange(1, n + 1)
        maps.append(arr[order, j])
    return RankedPointSet(ranks, maps)


@dataclass(frozen=True)
class QueryBox:
    """Per-dimension closed bounds in rank space; infinities are floats."""

    lo: tuple
    hi: tuple
    empty: bool = False

    @property
    def dim(self) -> int:
        return len(self.lo)

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ContractError("lo/hi arity mismatch")
        if not self.empty:
            for a, b in zip(self.lo, self.hi):
                if a > b and math.isfinite(a) and math.isfinite(b):
                    raise ContractError(f"lower bound {a} exceeds upper bound {b}")

    @classmethod
    def make_empty(cls, d: int) -> "QueryBox":
        return cls((POS_INF,) * d, (NEG_INF,) * d, empty=True)

    @classmethod
    def dominance(cls, upper: Sequence) -> "QueryBox":
        return cls((NEG_INF,) * len(upper), tuple(upper))

    @classmethod
    def five_sided(cls, a1, b1, b2, b3, b4) -> "QueryBox":
        return cls((a1, NEG_INF, NEG_INF, NEG_INF), (b1, b2, b3, b4))

    def kind(self) -> str:
        """One of 'empty', 'dominance', '5sided', 'general'."""
        if self.empty:
            return "empty"
        lower_free = [math.isinf(a) for a in self.lo]
        if all(lower_free):
            return "dominance"
        if self.dim == 4 and all(lower_free[1:]):
            return "5sided"
        return "general"

    def clamp(self, n: int) -> "QueryBox":
        """Integer bounds clipped to [1, n]; empty marker when an interval vanishes."""
        if self.empty:
            return self
        lo, hi = [], []
        for a, b in zip(self.lo, self.hi):
            a2 = 1 if a == NEG_INF else max(1, math.ceil(a))
            b2 = n if b == POS_INF else min(n, math.floor(b))
            if a2 > b2:
                return QueryBox.make_empty(self.dim)
            lo.append(a2)
            hi.append(b2)
        return QueryBox(tuple(lo), tuple(hi))

    def contains(self, coords: Sequence[int]) -> bool:
        if self.empty:
            return False
        return all(a <= c <= b for a, c, b in zip(self.lo, coords, self.hi))


def canonicalize_query(lo: Sequence, hi: Sequence, rps: RankedPointSet) -> QueryBox:
    """Map a raw box to rank space; snaps each finite bound inward to an input value."""
    if len(lo) != rps.dim or len(hi) != rps.dim:
        raise ContractError("query arity does not match point set")
    out_lo, out_hi = [], []
    for j in range(rps.dim):
        vals = rps.rank_maps[j]
        a, b = float(lo[j]), float(hi[j])
        if a == NEG_INF:
            ra = NEG_INF
        else:
            ra = int(np.searchsorted(vals, a, side="left")) + 1
            if ra > rps.n:
                return QueryBox.make_empty(rps.dim)
        if b == POS_INF:
            rb = POS_INF
        else:
            rb = int(np.searchsorted(vals, b, side="right"))
            if rb < 1:
                return QueryBox.make_empty(rps.dim)
        if ra > rb:
            return QueryBox.make_empty(rps.dim)
        out_lo.append(ra)
        out_hi.append(rb)
    return QueryBox(tuple(out_lo), tuple(out_hi))


def reflect_box(box: QueryBox, dim: int, n: int) -> QueryBox:
    if dim >= box.dim:
        raise ContractError("dimension index out of range")
    if box.empty:
        return box
    lo, hi = list(box.lo), list(box.hi)
    a, b = lo[dim], hi[dim]
    lo[dim] = NEG_INF if b == POS_INF else n + 1 - b
    hi[dim] = POS_INF if a == NEG_INF else n + 1 - a
    return QueryBox(tuple(lo), tuple(hi))


def reflect_points(ranks: np.ndarray, dim: int, n: int) -> np.ndarray:
    if dim >= ranks.shape[1]:
        raise ContractError("dimension index out of range")
    out = np.array(ranks, dtype=np.int64, copy=True)
    out[:, dim] = n + 1 - out[:, dim]
    return out


def reflect(obj, dim: int, n: int):
    """Reflect a point array or a QueryBox in one dimension: c -> n + 1 - c."""
    if isinstance(obj, QueryBox):
        return reflect_box(obj, dim, n)
    if isinstance(obj, RankedPointSet):
        return RankedPointSet(reflect_points(obj.ranks, dim, n), list(obj.rank_maps))
    return reflect_points(np.asarray(obj), dim, n)


def dominance_mask(coords: np.ndarray, upper: Iterable) -> np.ndarray:
    """Vectorized closed dominance test: rows with coords <= upper everywhere."""
    up = np.asarray(list(upper), dtype=np.float64)
    if coords.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return np.all(coords <= up, axis=1)


def first_index_at_least(sorted_vals: Sequence[int], v) -> int:
    return bisect.bisect_left(sorted_vals, v)
