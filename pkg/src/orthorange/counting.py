"""4D orthogonal range counting and selection by binary search over counts."""

from __future__ import annotations

import bisect
import math

import numpy as np

BLOCK = 16
BIG = 1 << 62


def _bound(v, default):
    if v is None or (isinstance(v, float) and math.isinf(v)):
        return default
    return int(v)


class _Layer:
    """Balanced tree over one dimension; nodes hold a layer on the remaining dimensions."""

    __slots__ = ("keys", "rest", "assoc", "n", "last", "karr")

    def __init__(self, coords: np.ndarray):
        order = np.argsort(coords[:, 0], kind="stable")
        c = coords[order]
        self.n = c.shape[0]
        self.last = c.shape[1] == 1
        self.karr = np.ascontiguousarray(c[:, 0])
        self.keys = self.karr.tolist()
        self.rest = None if self.last else np.ascontiguousarray(c[:, 1:])
        self.assoc: dict = {}
        if not self.last:
            self._build(0, self.n)

    def _build(self, lo, hi):
        if hi - lo <= BLOCK:
            return
        self.assoc[(lo, hi)] = _Layer(self.rest[lo:hi])
        mid = (lo + hi) // 2
        self._build(lo, mid)
        self._build(mid, hi)

    def size(self) -> int:
        return self.n + sum(a.size() for a in self.assoc.values())

    def count(self, lo, hi, ctr) -> int:
        a = bisect.bisect_left(self.keys, lo[0])
        b = bisect.bisect_right(self.keys, hi[0])
        ctr[0] += 1
        if a >= b:
            return 0
        if self.last:
            return b - a
        total = 0
        stack = [(0, self.n)]
        lo_r, hi_r = lo[1:], hi[1:]
        while stack:
            s, e = stack.pop()
            if e <= a or s >= b:
                continue
            ctr[0] += 1
            sub = self.assoc.get((s, e))
            if a <= s and e <= b and sub is not None:
                total += sub.count(lo_r, hi_r, ctr)
                continue
            if sub is None:
                s2, e2 = max(s, a), min(e, b)
                blk = self.rest[s2:e2]
                m = np.ones(e2 - s2, dtype=bool)
                for j in range(blk.shape[1]):
                    m &= (blk[:, j] >= lo_r[j]) & (blk[:, j] <= hi_r[j])
                total += int(np.count_nonzero(m))
                continue
            mid = (s + e) // 2
            stack.append((mid, e))
            stack.append((s, mid))
        return total


class Count4:
    def __init__(self, coords4):
        c = np.asarray(coords4, dtype=np.int64).reshape(-1, 4)
        self.coords = c
        self.n = c.shape[0]
        self.root = _Layer(c) if self.n else None
        self.node_visits = 0

    @property
    def size(self) -> int:
        return self.root.size() if self.root else 0

    def count(self, lo, hi) -> int:
        if self.root is None:
            return 0
        lo = [_bound(v, -BIG) for v in lo]
        hi = [_bound(v, BIG) for v in hi]
        if any(a > b for a, b in zip(lo, hi)):
            return 0
        ctr = [0]
        r = self.root.count(lo, hi, ctr)
        self.node_visits += ctr[0]
        self.last_visits = ctr[0]
        return r


def build_count4(points4) -> Count4:
    return Count4(points4)


def count4(c: Count4, box) -> int:
    if getattr(box, "empty", False):
        return 0
    return c.count(box.lo, box.hi)


class RangeCountProvider:
    """Counting/selection on the points whose first coordinate lies in [w_lo, w_hi]."""

    def __init__(self, c4: Count4, w_lo: int, w_hi: int, universe: int):
        self.c4 = c4
        self.w_lo, self.w_hi = w_lo, w_hi
        self.universe = universe
        self.n_count = 0
        self.n_select = 0
        self.select_calls: list[int] = []
        if c4.n:
            m = (c4.coords[:, 0] >= w_lo) & (c4.coords[:, 0] <= w_hi)
            sub = c4.coords[m]
        else:
            sub = np.zeros((0, 4), dtype=np.int64)
        self.axis_vals = [np.sort(sub[:, j + 1]).tolist() for j in range(3)]
        self.size = sub.shape[0]

    def count(self, x, y, z):
        self.n_count += 1
        return self.c4.count((self.w_lo, -BIG, -BIG, -BIG), (self.w_hi, x, y, z))

    def select(self, axis: int, fixed, k: int) -> int:
        self.n_select += 1
        vals = self.axis_vals[axis]
        s = len(vals)
        calls = 0

        def cnt(v):
            nonlocal calls
            calls += 1
            q = [0, 0, 0]
            q[axis] = v
            others = [j for j in range(3) if j != axis]
            q[others[0]], q[others[1]] = fixed
            return self.count(*q)

        # count(vals[i-1]) <= i, so the answer position is at least min(k, s)
        lo, hi = min(k, s), s
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if cnt(vals[mid - 1]) <= k:
                lo = mid
            else:
                hi = mid - 1
        self.select_calls.append(calls)
        return self.universe if lo == s else vals[lo] - 1

    def select_x(self, y, z, k):
        return self.select(0, (y, z), k)

    def select_y(self, x, z, k):
        return self.select(1, (x, z), k)

    def select_z(self, x, y, k):
        return self.select(2, (x, y), k)


def select_axis(c4: Count4, restriction, axis, fixed, k: int, universe: int | None = None) -> int:
    """Highest value on ``axis`` whose probe dominates at most k points of the restriction."""
    ax = {"x": 0, "y": 1, "z": 2}.get(axis, axis)
    U = universe if universe is not None else c4.n
    prov = RangeCountProvider(c4, restriction[0], restriction[1], U)
    return prov.select(ax, fixed, k)
