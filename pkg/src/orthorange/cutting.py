"""t-level 3D shallow cuttings.

A cutting is a list of apexes; cell i is the closed box (-inf, apex_i].  The
sweep constructor moves a plane downward in z and maintains a 2D staircase
of outer corners over the points below the plane.  An inner corner that
drops below k dominated points triggers a patch, and every new outer
corner becomes a cell stamped with the current plane.
"""

from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numba import njit

from . import oracle

C2_DEFAULT = 10


class ConstructionError(RuntimeError):
    def __init__(self, msg, query=None, key=None):
        super().__init__(msg)
        self.query = query
        self.key = key


class CountingProvider(Protocol):
    universe: int

    def count(self, x: int, y: int, z: int) -> int: ...
    def select_x(self, y: int, z: int, k: int) -> int: ...
    def select_y(self, x: int, z: int, k: int) -> int: ...
    def select_z(self, x: int, y: int, k: int) -> int: ...


@njit(cache=True)
def _count3(xs, ys, zs, x, y, z):
    c = 0
    for i in range(xs.shape[0]):
        if xs[i] <= x and ys[i] <= y and zs[i] <= z:
            c += 1
    return c


@njit(cache=True)
def _select3(vals, a, av, b, bv, k, universe):
    buf = np.empty(vals.shape[0], dtype=np.int64)
    m = 0
    for i in range(vals.shape[0]):
        if a[i] <= av and b[i] <= bv:
            buf[m] = vals[i]
            m += 1
    if m <= k:
        return universe
    return np.partition(buf[:m], k)[k] - 1


@njit(cache=True)
def _conflicts(coords, apexes):
    g, n = apexes.shape[0], coords.shape[0]
    off = np.zeros(g + 1, dtype=np.int64)
    for i in range(g):
        c = 0
        for j in range(n):
            if coords[j, 0] <= apexes[i, 0] and coords[j, 1] <= apexes[i, 1] and coords[j, 2] <= apexes[i, 2]:
                c += 1
        off[i + 1] = off[i] + c
    pos = np.empty(off[g], dtype=np.int64)
    for i in range(g):
        w = off[i]
        for j in range(n):
            if coords[j, 0] <= apexes[i, 0] and coords[j, 1] <= apexes[i, 1] and coords[j, 2] <= apexes[i, 2]:
                pos[w] = j
                w += 1
    return pos, off


class ArrayProvider:
    """Counting and selection by compiled scans over a 3D point array."""

    def __init__(self, coords: np.ndarray, universe: int):
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        self.xs = np.ascontiguousarray(coords[:, 0])
        self.ys = np.ascontiguousarray(coords[:, 1])
        self.zs = np.ascontiguousarray(coords[:, 2])
        self.universe = universe
        self.n_count = 0
        self.n_select = 0

    def count(self, x, y, z):
        self.n_count += 1
        return int(_count3(self.xs, self.ys, self.zs, x, y, z))

    def select_x(self, y, z, k):
        self.n_select += 1
        return int(_select3(self.xs, self.ys, y, self.zs, z, k, self.universe))

    def select_y(self, x, z, k):
        self.n_select += 1
        return int(_select3(self.ys, self.xs, x, self.zs, z, k, self.universe))

    def select_z(self, x, y, k):
        self.n_select += 1
        return int(_select3(self.zs, self.xs, x, self.ys, y, k, self.universe))


class OracleProvider:
    """Provider backed by the brute-force oracle; used by the naive constructor."""

    def __init__(self, coords: np.ndarray, universe: int):
        self.coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        self.universe = universe
        self.n_count = 0
        self.n_select = 0

    def count(self, x, y, z):
        self.n_count += 1
        return oracle.dominated_count(self.coords, (x, y, z))

    def select_x(self, y, z, k):
        self.n_select += 1
        return oracle.oracle_select(self.coords, "x", (y, z), k, self.universe)

    def select_y(self, x, z, k):
        self.n_select += 1
        return oracle.oracle_select(self.coords, "y", (x, z), k, self.universe)

    def select_z(self, x, y, k):
        self.n_select += 1
        return oracle.oracle_select(self.coords, "z", (x, y), k, self.universe)


@dataclass
class Cell:
    apex: tuple
    conflict: list
    owner: object = None
    level: int = 1


@dataclass(frozen=True)
class CornerEvent:
    x: int
    y: int
    endz: int


@dataclass
class Cutting:
    level: int
    apexes: np.ndarray
    universe: int
    coords: np.ndarray
    ids: np.ndarray
    stats: dict = field(default_factory=dict)
    owner: object = None
    _conf: tuple | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    def __len__(self):
        return int(self.apexes.shape[0])

    def conflict_index(self, i: int) -> np.ndarray:
        """Positions (into ``coords``) of the points inside cell i."""
        if self._conf is None:
            self._conf = _conflicts(np.ascontiguousarray(self.coords), np.ascontiguousarray(self.apexes))
        pos, off = self._conf
        return pos[off[i]:off[i + 1]]

    def conflict(self, i: int) -> np.ndarray:
        return self.ids[self.conflict_index(i)]

    def conflict_sizes(self) -> list[int]:
        return [len(self.conflict_index(i)) for i in range(len(self))]

    @property
    def cells(self) -> list[Cell]:
        return [Cell(tuple(int(v) for v in self.apexes[i]), self.conflict(i).tolist(), self.owner, self.level)
                for i in range(len(self))]

    def drop_cell(self, i: int) -> "Cutting":
        """Copy without cell i (fault injection for tests and verify)."""
        keep = np.ones(len(self), dtype=bool)
        keep[i] = False
        return Cutting(self.level, self.apexes[keep], self.universe, self.coords, self.ids,
                       dict(self.stats), self.owner)

    def to_json(self) -> dict:
        return {"level": self.level, "n": self.n,
                "cells": [{"apex": [int(v) for v in self.apexes[i]], "conflict": self.conflict(i).tolist()}
                          for i in range(len(self))]}


@dataclass
class PatchResult:
    new_outer: list
    removed_outer: list
    new_apexes: list
    added_inner: list
    removed_inner: list


class Staircase:
    """Outer corners of a 2D shallow cutting, x ascending and y descending.

    Inner corner j sits at (ox[j], oy[j + 1]).
    """

    def __init__(self, universe: int):
        self.universe = universe
        self.ox: list[int] = []
        self.oy: list[int] = []
        self.comparisons = 0

    def __len__(self):
        return len(self.ox)

    def outer(self) -> list[tuple[int, int]]:
        return list(zip(self.ox, self.oy))

    def inner(self) -> list[tuple[int, int]]:
        return [(self.ox[j], self.oy[j + 1]) for j in range(len(self.ox) - 1)]

    def _bisect(self, fn, v):
        self.comparisons += max(1, len(self.ox)).bit_length()
        return fn(self.ox, v)

    def index_of_inner(self, x: int) -> int:
        j = self._bisect(bisect.bisect_left, x)
        if j >= len(self.ox) - 1 or self.ox[j] != x:
            raise ConstructionError(f"no inner corner with x={x}")
        return j

    def patch(self, i: int, h: int, k: int, prov) -> PatchResult:
        """Repair the staircase after inner corner i fails at plane h.

        ``i = -1`` starts from the virtual corner (0, universe) and builds the
        initial staircase.
        """
        U = self.universe
        ox, oy = self.ox, self.oy
        n_inner = len(ox) - 1
        if i < 0:
            left, cy = 0, U
        else:
            left, cy = ox[i], oy[i]
        first = True
        new = []
        while True:
            cx = prov.select_x(cy, h, 10 * k)
            lo = self._bisect(bisect.bisect_left if first else bisect.bisect_right, left)
            hi = min(self._bisect(bisect.bisect_right, cx), n_inner)
            if hi > lo:
                dx, dy = ox[hi - 1], oy[hi]
                if dy <= cy and prov.count(dx, dy, h) >= 7 * k:
                    new.append((dx, cy))
                    break
            if cx >= U:
                new.append((U, cy))
                break
            new.append((cx, cy))
            left, first = cx, False
            cy = prov.select_y(cx, h, 9 * k)
        start = max(i, 0)
        old_tail = list(zip(ox[start:], oy[start:]))
        pool = sorted(set(old_tail) | set(new), key=lambda c: (-c[0], -c[1]))
        merged = []
        best = -1
        for c in pool:
            if c[1] > best:
                merged.append(c)
                best = c[1]
        merged.reverse()
        inner_from = max(start - 1, 0)
        old_inner = {(ox[j], oy[j + 1]) for j in range(inner_from, n_inner)}
        old_set = set(old_tail)
        self.ox = ox[:start] + [c[0] for c in merged]
        self.oy = oy[:start] + [c[1] for c in merged]
        nox, noy = self.ox, self.oy
        new_inner = {(nox[j], noy[j + 1]) for j in range(inner_from, len(nox) - 1)}
        merged_set = set(merged)
        new_outer = [c for c in merged if c not in old_set]
        return PatchResult(
            new_outer=new_outer,
            removed_outer=[c for c in old_tail if c not in merged_set],
            new_apexes=[(c[0], c[1], h) for c in new_outer],
            added_inner=sorted(new_inner - old_inner),
            removed_inner=sorted(old_inner - new_inner),
        )


def compute_end_event(x: int, y: int, k: int, prov, h: int | None = None) -> int:
    """Highest plane at which inner corner (x, y) dominates fewer than k points."""
    v = prov.select_z(x, y, k - 1)
    return v if h is None else min(v, h)


def _prepare(points3, ids, universe):
    coords = np.asarray(points3, dtype=np.int64).reshape(-1, 3)
    if ids is None:
        ids = np.arange(coords.shape[0], dtype=np.int64)
    else:
        ids = np.asarray(ids, dtype=np.int64)
    if universe is None:
        universe = int(coords.max()) if coords.size else 1
    return coords, ids, max(int(universe), 1)


def single_cell(coords, ids, universe, t) -> Cutting:
    ap = np.array([[universe, universe, universe]], dtype=np.int64)
    return Cutting(max(1, t), ap, universe, coords, ids, {"counts": 0, "selects": 0, "queue_ops": 0,
                                                           "patches": 0, "comparisons": 0})


class _Guarded:
    """Wraps a provider so any failure becomes a ConstructionError naming the query."""

    def __init__(self, prov):
        self._p = prov
        for name in ("count", "select_x", "select_y", "select_z"):
            setattr(self, name, self._wrap(name, getattr(prov, name)))

    @staticmethod
    def _wrap(name, fn):
        def call(*args):
            try:
                return fn(*args)
            except ConstructionError:
                raise
            except Exception as exc:  # noqa: BLE001 - provider failures are wrapped
                raise ConstructionError(f"provider failed on {name}{args}: {exc}",
                                        query=(name,) + tuple(args)) from exc
        return call

    def __getattr__(self, name):
        return getattr(self._p, name)


def build_cutting_sweep(points3, t: int, provider=None, ids=None, universe: int | None = None,
                        trace: list | None = None) -> Cutting:
    """Sweep-plane constructor driven by a corner-event queue."""
    coords, ids, U = _prepare(points3, ids, universe)
    k = max(1, int(t))
    n = coords.shape[0]
    if n <= 10 * k:
        return single_cell(coords, ids, U, k)
    prov = _Guarded(provider if provider is not None else ArrayProvider(coords, U))
    stair = Staircase(U)
    heap: list = []
    live: dict = {}
    version = 0
    queue_ops = 0
    apexes: list = []
    patches = 0

    def push(c, h):
        nonlocal version, queue_ops
        e = compute_end_event(c[0], c[1], k, prov, h)
        version += 1
        live[c] = version
        heapq.heappush(heap, (-e, c[0], c[1], version))
        queue_ops += 1

    def apply(res, h):
        nonlocal queue_ops
        apexes.extend(res.new_apexes)
        for c in res.removed_inner:
            if live.pop(c, None) is not None:
                queue_ops += 1
        for c in res.added_inner:
            push(c, h)
        if trace is not None:
            trace.append((h, res))

    res = stair.patch(-1, U, k, prov)
    patches += 1
    apply(res, U)
    while heap:
        ne, x, y, ver = heapq.heappop(heap)
        queue_ops += 1
        if live.get((x, y)) != ver:
            continue
        del live[(x, y)]
        h = -ne
        i = stair.index_of_inner(x)
        res = stair.patch(i, h, k, prov)
        patches += 1
        apply(res, h)
    ap = np.array(apexes, dtype=np.int64).reshape(-1, 3)
    stats = {"counts": getattr(prov, "n_count", 0), "selects": getattr(prov, "n_select", 0),
             "queue_ops": queue_ops, "patches": patches, "comparisons": stair.comparisons}
    return Cutting(k, ap, U, coords, ids, stats)


def build_cutting_naive(points3, t: int, ids=None, universe: int | None = None) -> Cutting:
    """Reference constructor: replays the patch rule one point removal at a time.

    No event queue and no selection structure; failing corners are found by
    recounting every inner corner at every plane, and thresholds come from the
    brute-force oracle.
    """
    coords, ids, U = _prepare(points3, ids, universe)
    k = max(1, int(t))
    n = coords.shape[0]
    if n <= 10 * k:
        return single_cell(coords, ids, U, k)
    prov = OracleProvider(coords, U)
    stair = Staircase(U)
    apexes: list = []
    apexes.extend(stair.patch(-1, U, k, prov).new_apexes)
    planes = [U] + sorted({int(z) - 1 for z in coords[:, 2] if int(z) - 1 < U}, reverse=True)
    for h in planes:
        below = coords[coords[:, 2] <= h]
        while len(stair) > 1:
            inner = np.array(stair.inner(), dtype=np.int64)
            cnt = np.count_nonzero((below[None, :, 0] <= inner[:, None, 0]) &
                                   (below[None, :, 1] <= inner[:, None, 1]), axis=1) \
                if len(below) else np.zeros(len(inner), dtype=np.int64)
            failing = np.flatnonzero(cnt <= k - 1)
            if len(failing) == 0:
                break
            j = int(failing[0])  # inner corners are x-sorted, so this is the smallest x
            apexes.extend(stair.patch(j, h, k, prov).new_apexes)
    ap = np.array(apexes, dtype=np.int64).reshape(-1, 3)
    return Cutting(k, ap, U, coords, ids, {"counts": prov.n_count, "selects": prov.n_select,
                                           "queue_ops": 0, "patches": 0, "comparisons": 0})


def build_cutting(points3, t: int, constructor: str = "sweep", ids=None, universe=None, provider=None) -> Cutting:
    if constructor == "sweep":
        return build_cutting_sweep(points3, t, provider=provider, ids=ids, universe=universe)
    if constructor == "naive":
        return build_cutting_naive(points3, t, ids=ids, universe=universe)
    raise ValueError(f"unknown constructor {constructor!r}")


def sweep_cost(cut: Cutting) -> int:
    s = cut.stats
    return int(s.get("counts", 0) + s.get("selects", 0) + s.get("queue_ops", 0))


def cell_bound(n: int, t: int) -> float:
    return 4 * n / max(1, t) + 4


def log2(x: float) -> float:
    return math.log2(max(2.0, x))
