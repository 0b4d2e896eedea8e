"""Full 4D structures on top of the restricted engine.

FiveSidedStructure groups first coordinates into m leaves, answers the fully
covered leaves with one restricted query and recurses into at most two
boundary leaves.  GeneralStructure lifts two-sided bounds on dimensions 2..4
through balanced trees: at the LCA of a bound's endpoints, the left child
answers a [a, inf) side through a reflected copy and the right child a
(-inf, b] side; dimensions beyond four use plain range trees.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .geometry import ContractError, QueryBox
from .restricted import EngineConfig, QueryStats, RestrictedStructure

INF = math.inf


@dataclass
class OuterConfig:
    beta: int = 3
    nested_c: int = 16
    cutoff_n0: int = 64
    delta: int | None = None
    constructor: str = "sweep"
    provider: str = "array"
    top_leaves: int | None = None
    fault: str | None = None

    def engine(self) -> EngineConfig:
        return EngineConfig(self.beta, self.nested_c, self.delta, self.constructor, self.provider, self.fault)


def top_leaf_count(n: int, beta: int = 3, forced: int | None = None) -> int:
    """Admissible leaf count 2**(beta**j), j >= 1, closest to n**(1/3) on a log scale."""
    if forced:
        return forced
    target = math.log2(max(n, 2)) / 3
    e = beta
    while abs(e * beta - target) < abs(e - target):
        e *= beta
    return 2 ** e


def _scan(coords, ids, lo, hi, out, st):
    if len(ids) == 0:
        return
    st.scanned += len(ids)
    m = np.ones(len(ids), dtype=bool)
    for j in range(coords.shape[1]):
        if lo[j] != -INF:
            m &= coords[:, j] >= lo[j]
        if hi[j] != INF:
            m &= coords[:, j] <= hi[j]
    hit = ids[m]
    if len(hit):
        out.extend(hit.tolist())
        st.reported += len(hit)


class FiveSidedStructure:
    """Queries [a1, b1] x (-inf, b2] x (-inf, b3] x (-inf, b4] over 4D rank-space points."""

    def __init__(self, coords4, ids=None, universe: int | None = None, cfg: OuterConfig | None = None,
                 level: int = 0, lazy: bool = False):
        self.cfg = cfg or OuterConfig()
        c = np.asarray(coords4, dtype=np.int64).reshape(-1, 4)
        ids = np.arange(c.shape[0], dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        order = np.argsort(c[:, 0], kind="stable")
        self.c = c[order]
        self.ids = ids[order]
        self.n = c.shape[0]
        self.level = level
        self.universe = universe if universe is not None else max(self.n, 1)
        self.first = self.c[:, 0].tolist()
        self.flat = self.n <= self.cfg.cutoff_n0
        self.restricted = None
        self._bottoms: list = []
        self.lazy = lazy
        self.offsets: list = [0, self.n]
        if self.flat:
            return
        m = min(top_leaf_count(self.n, self.cfg.beta, self.cfg.top_leaves), self.n)
        self.m = m
        self.offsets = [(j * self.n) // m for j in range(m + 1)]
        w = np.empty(self.n, dtype=np.int64)
        for j in range(m):
            w[self.offsets[j]:self.offsets[j + 1]] = j + 1
        self.restricted = RestrictedStructure(w, self.c[:, 1:], self.ids, m, self.universe, self.cfg.engine())
        self._bottoms: list = [None] * m
        if not lazy:
            self.materialize()

    def bottom(self, j: int) -> "FiveSidedStructure":
        b = self._bottoms[j]
        if b is None:
            s, e = self.offsets[j], self.offsets[j + 1]
            b = FiveSidedStructure(self.c[s:e], self.ids[s:e], self.universe, self.cfg, self.level + 1, self.lazy)
            self._bottoms[j] = b
        return b

    @property
    def bottoms(self) -> list:
        return [self.bottom(j) for j in range(len(self._bottoms))]

    def materialize(self):
        for b in self.bottoms:
            b.materialize()
        return self

    def _leaf_of(self, pos: int) -> int:
        return bisect.bisect_right(self.offsets, pos) - 1

    def query(self, a1, b1, q3, out: list | None = None, st: QueryStats | None = None):
        """Append ids in the 5-sided box; returns (out, stats)."""
        out = [] if out is None else out
        st = st or QueryStats()
        U = self.universe
        q3 = tuple(U if v == INF else 0 if v == -INF else int(min(v, U)) for v in q3)
        if min(q3) < 1:
            return out, st
        self._query(a1, b1, q3, out, st, 0)
        return out, st

    def _query(self, a1, b1, q3, out, st, depth):
        st.recursion_depth = max(st.recursion_depth, depth)
        if self.n == 0:
            return
        lo = 0 if a1 == -INF else bisect.bisect_left(self.first, a1)
        hi = self.n if b1 == INF else bisect.bisect_right(self.first, b1)
        if lo >= hi:
            return
        if self.flat:
            blk = self.c[lo:hi]
            st.scanned += hi - lo
            m = (blk[:, 1] <= q3[0]) & (blk[:, 2] <= q3[1]) & (blk[:, 3] <= q3[2])
            hit = self.ids[lo:hi][m]
            if len(hit):
                out.extend(hit.tolist())
                st.reported += len(hit)
            return
        ja, jb = self._leaf_of(lo), self._leaf_of(hi - 1)
        if ja == jb:
            self.bottom(ja)._query(a1, b1, q3, out, st, depth + 1)
            return
        full_a = lo == self.offsets[ja]
        full_b = hi == self.offsets[jb + 1]
        ta = ja if full_a else ja + 1
        tb = jb if full_b else jb - 1
        if ta <= tb:
            self.restricted.report(ta + 1, tb + 1, q3, st, out)
        if not full_a:
            self.bottom(ja)._query(a1, INF, q3, out, st, depth + 1)
        if not full_b:
            self.bottom(jb)._query(-INF, b1, q3, out, st, depth + 1)

    def query_dominance4(self, q4, out=None, st=None):
        return self.query(-INF, q4[0], q4[1:], out, st)

    def is_empty(self, a1, b1, q3, st: QueryStats | None = None) -> bool:
        """Emptiness via the restricted engine on covered leaves and recursion on the boundary."""
        U = self.universe
        q3 = tuple(U if v == INF else 0 if v == -INF else int(min(v, U)) for v in q3)
        if self.n == 0 or min(q3) < 1:
            return True
        lo = 0 if a1 == -INF else bisect.bisect_left(self.first, a1)
        hi = self.n if b1 == INF else bisect.bisect_right(self.first, b1)
        if lo >= hi:
            return True
        if self.flat:
            blk = self.c[lo:hi]
            return not bool(np.any((blk[:, 1] <= q3[0]) & (blk[:, 2] <= q3[1]) & (blk[:, 3] <= q3[2])))
        ja, jb = self._leaf_of(lo), self._leaf_of(hi - 1)
        if ja == jb:
            return self.bottom(ja).is_empty(a1, b1, q3, st)
        full_a = lo == self.offsets[ja]
        full_b = hi == self.offsets[jb + 1]
        ta = ja if full_a else ja + 1
        tb = jb if full_b else jb - 1
        if ta <= tb and self.restricted.emptiness(ta + 1, tb + 1, q3, st)[0]:
            return False
        if not full_a and not self.bottom(ja).is_empty(a1, INF, q3, st):
            return False
        if not full_b and not self.bottom(jb).is_empty(-INF, b1, q3, st):
            return False
        return True

    # -- accounting ----------------------------------------------------------------
    def restricted_instances(self):
        if self.restricted is not None:
            yield self.restricted
        for b in self.bottoms:
            yield from b.restricted_instances()

    def depth(self) -> int:
        return 0 if self.flat else 1 + max(b.depth() for b in self.bottoms)

    def total_entities(self) -> int:
        if self.flat:
            return self.n
        return self.n + self.restricted.total_entities() + sum(b.total_entities() for b in self.bottoms)

    def stats_json(self) -> dict:
        per_tree: dict = {}
        nested = cells = 0
        build = {"counts": 0, "selects": 0, "queue_ops": 0}
        inst = 0
        for r in self.restricted_instances():
            if r.store is None:
                continue
            inst += 1
            for i, d in r.store.per_tree_cells().items():
                agg = per_tree.setdefault(f"T{i}", {"cells": 0, "nested_cells": 0})
                agg["cells"] += d["cells"]
                agg["nested_cells"] += d["nested_cells"]
                cells += d["cells"]
                nested += d["nested_cells"]
            for k in build:
                build[k] += r.store.build_stats[k]
        return {"n": self.n, "restricted_instances": inst, "recursion_depth": self.depth(),
                "cells_total": cells, "nested_cells_total": nested, "per_tree": per_tree,
                "construction_queries": build, "total_entities": self.total_entities()}


def build_5sided(coords4, ids=None, universe=None, cfg=None) -> FiveSidedStructure:
    return FiveSidedStructure(coords4, ids, universe, cfg)


def query_5sided(s: FiveSidedStructure, box: QueryBox):
    if box.empty:
        return [], QueryStats()
    return s.query(box.lo[0], box.hi[0], box.hi[1:])


def query_dominance4(s: FiveSidedStructure, q4):
    return s.query_dominance4(q4)


class _Lift:
    """Balanced tree over one lifted dimension of a 4D point set.

    ``coords`` are already transformed so every earlier lifted dimension is an
    upper bound; ``dim`` is the dimension lifted here (1, 2 or 3).
    """

    def __init__(self, coords, ids, dim: int, universe: int, cfg: OuterConfig):
        order = np.argsort(coords[:, dim], kind="stable")
        self.c = coords[order]
        self.ids = ids[order]
        self.keys = self.c[:, dim].tolist()
        self.n = len(self.ids)
        self.dim = dim
        self.universe = universe
        self.cfg = cfg
        self.children: dict = {}

    def _child(self, lo, hi, reflected: bool):
        key = (lo, hi, reflected)
        got = self.children.get(key)
        if got is None:
            c = self.c[lo:hi].copy()
            if reflected:
                c[:, self.dim] = self.universe + 1 - c[:, self.dim]
            ids = self.ids[lo:hi]
            if hi - lo <= self.cfg.cutoff_n0:
                got = ("flat", c, ids)
            elif self.dim == 3:
                got = FiveSidedStructure(c, ids, self.universe, self.cfg, lazy=True)
            else:
                got = _Lift(c, ids, self.dim + 1, self.universe, self.cfg)
            self.children[key] = got
        return got

    def _ask(self, node, lo, hi, out, st):
        if isinstance(node, tuple):
            _scan(node[1], node[2], lo, hi, out, st)
        elif isinstance(node, FiveSidedStructure):
            node.query(lo[0], hi[0], hi[1:], out, st)
        else:
            node.query(lo, hi, out, st)

    def query(self, lo, hi, out, st):
        j = self.dim
        a, b = lo[j], hi[j]
        U = self.universe
        if a == -INF:
            self._ask(self._child(0, self.n, False), lo, hi, out, st)
            return
        if b == INF:
            lo2, hi2 = list(lo), list(hi)
            lo2[j], hi2[j] = -INF, U + 1 - a
            self._ask(self._child(0, self.n, True), lo2, hi2, out, st)
            return
        p = bisect.bisect_left(self.keys, a)
        r = bisect.bisect_right(self.keys, b) - 1
        if p > r:
            return
        if p == r:
            _scan(self.c[p:p + 1], self.ids[p:p + 1], lo, hi, out, st)
            return
        s, e = 0, self.n
        visits = 0
        while True:
            visits += 1
            mid = (s + e) // 2
            if r < mid:
                e = mid
            elif p >= mid:
                s = mid
            else:
                break
        st.lifted_nodes += visits
        st.lift_visits[j] = max(st.lift_visits.get(j, 0), visits)
        lo_l, hi_l = list(lo), list(hi)
        lo_l[j], hi_l[j] = -INF, U + 1 - a
        self._ask(self._child(s, mid, True), lo_l, hi_l, out, st)
        lo_r, hi_r = list(lo), list(hi)
        lo_r[j] = -INF
        self._ask(self._child(mid, e, False), lo_r, hi_r, out, st)

    def iter_children(self):
        """Every node structure of the full tree (root in both orientations)."""
        yield (0, self.n, False)
        yield (0, self.n, True)
        stack = [(0, self.n)]
        while stack:
            s, e = stack.pop()
            if e - s <= 1:
                continue
            mid = (s + e) // 2
            yield (s, mid, True)
            yield (mid, e, False)
            stack.append((s, mid))
            stack.append((mid, e))


class _RangeTree:
    """Plain range tree on the last dimension for d >= 5; nodes hold (d-1)-dimensional structures."""

    def __init__(self, coords, ids, universe, cfg):
        d = coords.shape[1]
        order = np.argsort(coords[:, d - 1], kind="stable")
        self.c = coords[order]
        self.ids = ids[order]
        self.keys = self.c[:, d - 1].tolist()
        self.n = len(self.ids)
        self.d = d
        self.universe = universe
        self.cfg = cfg
        self.nodes: dict = {}

    def _node(self, s, e):
        got = self.nodes.get((s, e))
        if got is None:
            got = GeneralStructure(self.c[s:e, :self.d - 1], self.ids[s:e], self.universe, self.cfg)
            self.nodes[(s, e)] = got
        return got

    def query(self, lo, hi, out, st):
        a, b = lo[-1], hi[-1]
        p = 0 if a == -INF else bisect.bisect_left(self.keys, a)
        r = self.n if b == INF else bisect.bisect_right(self.keys, b)
        if p >= r:
            return
        stack = [(0, self.n)]
        touched = 0
        while stack:
            s, e = stack.pop()
            if e <= p or s >= r:
                continue
            st.lifted_nodes += 1
            if p <= s and e <= r:
                touched += 1
                if e - s <= self.cfg.cutoff_n0:
                    _scan(self.c[s:e, :self.d - 1], self.ids[s:e], lo[:-1], hi[:-1], out, st)
                else:
                    self._node(s, e).query_box(lo[:-1], hi[:-1], out, st)
                continue
            if e - s <= self.cfg.cutoff_n0:
                touched += 1
                _scan(self.c[max(s, p):min(e, r)], self.ids[max(s, p):min(e, r)], lo, hi, out, st)
                continue
            mid = (s + e) // 2
            stack.append((mid, e))
            stack.append((s, mid))
        dim = self.d - 1
        st.lift_visits[dim] = max(st.lift_visits.get(dim, 0), touched)


class GeneralStructure:
    """Orthogonal range reporting for full boxes in d >= 4 dimensions (node structures built lazily)."""

    def __init__(self, coords, ids=None, universe: int | None = None, cfg: OuterConfig | None = None):
        c = np.asarray(coords, dtype=np.int64)
        if c.ndim != 2 or c.shape[1] < 4:
            raise ContractError("general structure needs d >= 4")
        self.cfg = cfg or OuterConfig()
        self.d = c.shape[1]
        self.n = c.shape[0]
        self.ids = np.arange(self.n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        self.universe = universe if universe is not None else max(self.n, 1)
        self.coords = c
        if self.d == 4:
            self.inner = _Lift(c, self.ids, 1, self.universe, self.cfg)
        else:
            self.inner = _RangeTree(c, self.ids, self.universe, self.cfg)

    def query_box(self, lo, hi, out, st):
        self.inner.query(list(lo), list(hi), out, st)

    def query(self, box: QueryBox, st: QueryStats | None = None):
        st = st or QueryStats()
        out: list = []
        if box.empty or self.n == 0:
            return out, st
        if box.dim != self.d:
            raise ContractError(f"box has {box.dim} dims, structure has {self.d}")
        self.query_box(box.lo, box.hi, out, st)
        return out, st

    def materialized(self) -> int:
        def count(node):
            if isinstance(node, _Lift):
                return 1 + sum(count(ch) for ch in node.children.values() if not isinstance(ch, tuple))
            if isinstance(node, _RangeTree):
                return 1 + sum(count(g.inner) for g in node.nodes.values())
            return 1
        return count(self.inner)


def build_general(coords, d: int | None = None, ids=None, universe=None, cfg=None) -> GeneralStructure:
    c = np.asarray(coords)
    if d is not None and c.shape[1] != d:
        raise ContractError("dimension mismatch")
    if c.shape[1] < 4:
        raise ContractError("unsupported dimension: d must be >= 4")
    return GeneralStructure(c, ids, universe, cfg)


def query_general(s: GeneralStructure, box: QueryBox):
    return s.query(box)


def general_entities(coords, universe: int, cfg: OuterConfig | None = None, progress=None) -> int:
    """Total entities of the fully materialized 4D general structure.

    Every node structure is built, measured and released in turn, so peak
    memory stays at one node structure.
    """
    cfg = cfg or OuterConfig()
    c = np.asarray(coords, dtype=np.int64)
    ids = np.arange(c.shape[0], dtype=np.int64)
    total = 0

    def walk(lift: _Lift):
        nonlocal total
        total += lift.n  # sorted copy held by the tree
        for s, e, refl in lift.iter_children():
            ch = lift._child(s, e, refl)
            if isinstance(ch, tuple):
                total += len(ch[2])
            elif isinstance(ch, FiveSidedStructure):
                total += ch.materialize().total_entities()
            else:
                walk(ch)
            lift.children.pop((s, e, refl), None)
            if progress is not None:
                progress(total)

    walk(_Lift(c, ids, 1, universe, cfg))
    return total


def general_entities_estimate(coords, universe: int, cfg: OuterConfig | None = None, samples: int = 2,
                              seed: int = 0) -> float:
    """Stratified estimate of ``general_entities`` for sizes where the exact walk is too slow.

    Strata are (tree level, orientation) inside every lifted tree: ``samples``
    nodes per stratum are measured and scaled by the stratum size. Flat
    children are counted exactly; 5-sided children are built once per size and
    the measurement is reused for every child of that size.
    """
    cfg = cfg or OuterConfig()
    c = np.asarray(coords, dtype=np.int64)
    rng = np.random.default_rng(seed)
    five: dict = {}

    def value(lift: _Lift, s, e, refl):
        size = e - s
        if size <= cfg.cutoff_n0:
            return float(size)
        if lift.dim == 3:
            if size not in five:
                five[size] = float(lift._child(s, e, refl).materialize().total_entities())
                lift.children.pop((s, e, refl), None)
            return five[size]
        ch = lift._child(s, e, refl)
        lift.children.pop((s, e, refl), None)
        return walk(ch)

    def walk(lift: _Lift) -> float:
        total = float(lift.n) + value(lift, 0, lift.n, False) + value(lift, 0, lift.n, True)
        level = [(0, lift.n)] if lift.n > 1 else []
        while level:
            left = [(s, (s + e) // 2) for s, e in level]
            right = [((s + e) // 2, e) for s, e in level]
            for nodes, refl in ((left, True), (right, False)):
                if len(nodes) <= samples:
                    total += sum(value(lift, s, e, refl) for s, e in nodes)
                else:
                    pick = rng.choice(len(nodes), samples, replace=False)
                    total += len(nodes) * float(np.mean([value(lift, *nodes[i], refl) for i in pick]))
            level = [(s, e) for s, e in left + right if e - s > 1]
        return total

    return walk(_Lift(c, np.arange(c.shape[0], dtype=np.int64), 1, universe, cfg))
