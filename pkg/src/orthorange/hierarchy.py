"""The tree family T_2..T_L over m leaves, range covers, and the cutting store.

Tree T_i has fanout 2**s_i where s_i = e / beta**(i-1) and m = 2**e, so a
node of T_i at depth d is the node of T_{i+1} at depth beta*d.  Ranges
P(v, l, r) address the points under children l..r of node v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .counting import Count4, RangeCountProvider
from .cutting import ConstructionError, Cutting, build_cutting_naive, build_cutting_sweep
from .dominance import Dom3, first_containing
from .findany import FindAnyIndex


@dataclass(frozen=True)
class TreeSpec:
    index: int
    step: int      # s_i
    fanout: int
    height: int
    t: int         # cutting level
    u: int         # nested cutting level


@dataclass(frozen=True)
class TreeSchedule:
    m_real: int
    m: int
    e: int
    beta: int
    n: int
    nested_c: int
    trees: tuple
    delta: int

    @property
    def L(self) -> int:
        return self.trees[-1].index

    def tree(self, i: int) -> TreeSpec:
        return self.trees[i - 2]

    def to_json(self) -> dict:
        return {"m_real": self.m_real, "m": self.m, "e": self.e, "beta": self.beta, "n": self.n,
                "nested_c": self.nested_c, "L": self.L, "delta": self.delta,
                "trees": [{"index": t.index, "fanout": t.fanout, "height": t.height, "t": t.t, "u": t.u}
                          for t in self.trees]}


def _padded_exponent(m: int, beta: int) -> int:
    need = max(1, math.ceil(math.log2(m)))
    e = beta
    while e < need:
        e *= beta
    return e


def default_delta(n: int, beta: int, L: int) -> int:
    lg = math.log2(max(n, 4))
    llg = math.log2(lg)
    d = round(math.log(max(lg / max(llg, 1.0), 1.0), beta)) if lg > 1 else 2
    return min(max(d, 2), L)


def plan_fanouts(m: int, beta: int = 3, n: int | None = None, nested_c: int = 16,
                 delta: int | None = None) -> TreeSchedule:
    if m < 2:
        raise ValueError("leaf count m must be at least 2")
    if beta < 2:
        raise ValueError("beta must be at least 2")
    e = _padded_exponent(m, beta)
    n = n if n is not None else m
    specs = []
    prev_fan = 2 ** e
    i, s = 2, e // beta
    while True:
        fan = 2 ** s
        specs.append(TreeSpec(i, s, fan, e // s, prev_fan * prev_fan, max(1, (fan * fan) // nested_c)))
        if s == 1:
            break
        prev_fan = fan
        s //= beta
        i += 1
    L = specs[-1].index
    d = default_delta(n, beta, L) if delta is None else min(max(int(delta), 2), L)
    return TreeSchedule(m, 2 ** e, e, beta, n, nested_c, tuple(specs), d)


@dataclass(frozen=True, order=True)
class RangeKey:
    tree: int
    depth: int
    index: int
    l: int
    r: int
    kind: str = field(default="bounded", compare=False)


def _kind(l, r, f):
    if l == 1 and r == f:
        return "full"
    if l == 1:
        return "prefix"
    if r == f:
        return "suffix"
    return "bounded"


def make_key(sched: TreeSchedule, i: int, depth: int, index: int, l: int, r: int) -> RangeKey:
    spec = sched.tree(i)
    if not (0 <= depth < spec.height) or not (0 <= index < spec.fanout ** depth):
        raise ValueError(f"invalid node ({depth}, {index}) in T{i}")
    if not (1 <= l <= r <= spec.fanout):
        raise ValueError(f"invalid child interval [{l}, {r}]")
    return RangeKey(i, depth, index, l, r, _kind(l, r, spec.fanout))


def key_leaves(sched: TreeSchedule, key: RangeKey) -> tuple[int, int]:
    """Half-open 0-based leaf interval of P(v, l, r)."""
    spec = sched.tree(key.tree)
    width = spec.fanout ** (spec.height - key.depth)
    cw = width // spec.fanout
    base = key.index * width
    return base + (key.l - 1) * cw, base + key.r * cw


def node_leaves(sched: TreeSchedule, i: int, depth: int, index: int) -> tuple[int, int]:
    spec = sched.tree(i)
    width = spec.fanout ** (spec.height - depth)
    return index * width, (index + 1) * width


def _digits(x: int, f: int, H: int) -> list[int]:
    out = [0] * H
    for j in range(H - 1, -1, -1):
        out[j] = x % f
        x //= f
    return out


def decompose(sched: TreeSchedule, i: int, depth: int, index: int, H: int, lo: int, hi: int) -> list[RangeKey]:
    """Cover units lo..hi (inclusive) of the H-levels-down grid under node (depth, index) of T_i."""
    spec = sched.tree(i)
    f = spec.fanout
    a, b = _digits(lo, f, H), _digits(hi, f, H)

    def node(j, digs):
        idx = index
        for dgt in digs[:j]:
            idx = idx * f + dgt
        return depth + j, idx

    def key(j, digs, l, r):
        d, idx = node(j, digs)
        return RangeKey(i, d, idx, l, r, _kind(l, r, f))

    p = 0
    while p < H and a[p] == b[p]:
        p += 1
    if p == H:
        return [key(H - 1, a, a[H - 1] + 1, a[H - 1] + 1)]

    def cover_suffix(j):
        if all(v == 0 for v in a[j:]):
            return [key(j, a, 1, f)]
        if all(v == 0 for v in a[j + 1:]):
            return [key(j, a, a[j] + 1, f)]
        res = cover_suffix(j + 1)
        if a[j] + 2 <= f:
            res.append(key(j, a, a[j] + 2, f))
        return res

    def cover_prefix(j):
        if all(v == f - 1 for v in b[j:]):
            return [key(j, b, 1, f)]
        if all(v == f - 1 for v in b[j + 1:]):
            return [key(j, b, 1, b[j] + 1)]
        res = []
        if b[j] >= 1:
            res.append(key(j, b, 1, b[j]))
        return res + cover_prefix(j + 1)

    left_full = all(v == 0 for v in a[p + 1:])
    right_full = all(v == f - 1 for v in b[p + 1:])
    out = [] if left_full else cover_suffix(p + 1)
    lo_c = a[p] + 1 if left_full else a[p] + 2
    hi_c = b[p] + 1 if right_full else b[p]
    if lo_c <= hi_c:
        out.append(key(p, a, lo_c, hi_c))
    if not right_full:
        out += cover_prefix(p + 1)
    return out


def node_cover(sched: TreeSchedule, key: RangeKey) -> list[RangeKey]:
    """Partition P(v, l, r) of T_i into ranges of T_{i+1}."""
    if key.tree >= sched.L:
        raise ValueError("the last tree has no successor")
    spec = sched.tree(key.tree)
    nxt = sched.tree(key.tree + 1)
    ratio = spec.step // nxt.step
    return decompose(sched, key.tree + 1, key.depth * ratio, key.index, ratio, key.l - 1, key.r - 1)


def node_cover_bounded(sched, i, v, l, r):
    depth, index = v
    return node_cover(sched, make_key(sched, i, depth, index, l, r))


def node_cover_prefix(sched, i, v, r):
    depth, index = v
    return node_cover(sched, make_key(sched, i, depth, index, 1, r))


def node_cover_suffix(sched, i, v, l):
    depth, index = v
    spec = sched.tree(i)
    return node_cover(sched, make_key(sched, i, depth, index, l, spec.fanout))


def iterated_cover(sched: TreeSchedule, keys: list[RangeKey], target: int) -> list[RangeKey]:
    cur = list(keys)
    while cur and cur[0].tree < target:
        nxt = []
        for k in cur:
            nxt.extend(node_cover(sched, k))
        cur = nxt
    return cur


def init_decomposition(sched: TreeSchedule, a1: int, b1: int) -> list[RangeKey]:
    """Ranges of T_2 partitioning leaves a1..b1 (1-based, inclusive)."""
    spec = sched.tree(2)
    return decompose(sched, 2, 0, 0, spec.height, a1 - 1, b1 - 1)


def last_tree_node(sched: TreeSchedule, key: RangeKey) -> tuple[int, int]:
    """The T_L node whose subtree is P(key) (key must be a T_L range)."""
    spec = sched.tree(key.tree)
    if spec.fanout != 2:
        raise ValueError("last tree must be binary")
    if key.l == 1 and key.r == 2:
        return key.depth, key.index
    return key.depth + 1, key.index * 2 + (key.l - 1)


def all_keys(sched: TreeSchedule, i: int):
    spec = sched.tree(i)
    f = spec.fanout
    for d in range(spec.height):
        for idx in range(f ** d):
            for l in range(1, f + 1):
                for r in range(l, f + 1):
                    yield RangeKey(i, d, idx, l, r, _kind(l, r, f))


@dataclass
class RangeCutting:
    """A range's cutting plus, per cell, its nested cutting and FIND-ANY index."""

    cut: Cutting
    fa: FindAnyIndex
    nested: list
    nested_fa: list
    lists: list | None = None   # last tree: per cell, per nested cell, (coords3 array, ids array)

    @property
    def nested_cells(self) -> int:
        return sum(len(c) for c in self.nested)


@dataclass
class Log6Cutting:
    cut: Cutting
    dom: list


@dataclass
class StoreConfig:
    constructor: str = "sweep"
    provider: str = "array"
    log6_c: float = 1.0
    fault: str | None = None    # "drop-cell": remove the last cell of every multi-cell cutting


class CuttingStore:
    """All cuttings, nested cuttings, links and last-layer structures of one instance."""

    def __init__(self, sched: TreeSchedule, w, coords3, ids, universe: int, cfg: StoreConfig | None = None):
        self.sched = sched
        self.cfg = cfg or StoreConfig()
        self.universe = universe
        w = np.asarray(w, dtype=np.int64)
        order = np.argsort(w, kind="stable")
        self.w = w[order]
        self.coords = np.asarray(coords3, dtype=np.int64).reshape(-1, 3)[order]
        self.ids = np.asarray(ids, dtype=np.int64)[order]
        self.offsets = np.searchsorted(self.w, np.arange(1, sched.m + 2), side="left")
        self.ranges: dict[RangeKey, RangeCutting] = {}
        self.gamma: dict[RangeKey, list] = {}
        self.lam: dict[RangeKey, list] = {}
        self.log6: dict[tuple, Log6Cutting] = {}
        self._cache: dict = {}
        self._count4 = None
        self.build_stats = {"counts": 0, "selects": 0, "queue_ops": 0}

    # -- slices -------------------------------------------------------------
    def slice_of_leaves(self, lo_leaf: int, hi_leaf: int) -> tuple[int, int]:
        return int(self.offsets[lo_leaf]), int(self.offsets[hi_leaf])

    def key_slice(self, key: RangeKey) -> tuple[int, int]:
        return self.slice_of_leaves(*key_leaves(self.sched, key))

    def key_points(self, key: RangeKey):
        lo, hi = self.key_slice(key)
        return self.coords[lo:hi], self.ids[lo:hi]

    # -- construction -------------------------------------------------------
    def _provider(self, lo, hi, coords):
        if self.cfg.provider != "count4":
            return None
        if self._count4 is None:
            pos = np.arange(len(self.w), dtype=np.int64)
            self._count4 = Count4(np.column_stack([pos, self.coords]))
        return RangeCountProvider(self._count4, lo, hi - 1, self.universe)

    def _cut(self, coords, ids, t, lo=None, hi=None):
        if self.cfg.constructor == "naive":
            c = build_cutting_naive(coords, t, ids=ids, universe=self.universe)
        else:
            prov = self._provider(lo, hi, coords) if lo is not None and len(coords) > 10 * t else None
            c = build_cutting_sweep(coords, t, provider=prov, ids=ids, universe=self.universe)
        if self.cfg.fault == "drop-cell" and len(c) > 1:
            c = c.drop_cell(len(c) - 1)
        for k in self.build_stats:
            self.build_stats[k] += c.stats.get(k, 0)
        return c

    def range_cutting(self, key: RangeKey) -> RangeCutting:
        got = self.ranges.get(key)
        if got is not None:
            return got
        spec = self.sched.tree(key.tree)
        lo, hi = self.key_slice(key)
        ck = (key.tree, lo, hi)
        rc = self._cache.get(ck)
        if rc is None:
            try:
                rc = self._build_range(spec, lo, hi, last=key.tree == self.sched.L)
            except ConstructionError as exc:
                exc.key = key
                raise
            self._cache[ck] = rc
        self.ranges[key] = rc
        return rc

    def _build_range(self, spec: TreeSpec, lo: int, hi: int, last: bool) -> RangeCutting:
        coords, ids = self.coords[lo:hi], self.ids[lo:hi]
        cut = self._cut(coords, ids, spec.t, lo, hi)
        nested, nfa, lists = [], [], [] if last else None
        for ci in range(len(cut)):
            pos = cut.conflict_index(ci)
            sub, sid = coords[pos], ids[pos]
            nc = self._cut(sub, sid, spec.u)
            nc.apexes = np.minimum(nc.apexes, cut.apexes[ci])
            nested.append(nc)
            nfa.append(FindAnyIndex(nc.apexes))
            if last:
                per = []
                for nj in range(len(nc)):
                    p2 = nc.conflict_index(nj)
                    per.append((sub[p2], sid[p2]))
                lists.append(per)
            nc._conf = None
        cut._conf = None
        return RangeCutting(cut, FindAnyIndex(cut.apexes), nested, nfa, lists)

    def build(self):
        s = self.sched
        for spec in s.trees:
            for key in all_keys(s, spec.index):
                self.range_cutting(key)
        self._build_log6()
        for spec in s.trees[:-1]:
            for key in all_keys(s, spec.index):
                self.gamma[key] = self.link_gamma(key)
        for key in all_keys(s, s.delta):
            self.lam[key] = self.link_lambda(key)
        self._count4 = None
        return self

    def iter_cuttings(self):
        """(label, cutting, level, box) for every stored cutting; box is the parent apex of a nested one."""
        seen = set()
        for key, rc in self.ranges.items():
            if id(rc) in seen:
                continue
            seen.add(id(rc))
            spec = self.sched.tree(key.tree)
            yield f"T{key.tree} {key.kind} d{key.depth} i{key.index} [{key.l},{key.r}]", rc.cut, spec.t, None
            for ci, nc in enumerate(rc.nested):
                yield (f"T{key.tree} {key.kind} d{key.depth} i{key.index} [{key.l},{key.r}] nested {ci}", nc,
                       spec.u, tuple(int(v) for v in rc.cut.apexes[ci]))
        for node, lc in self.log6.items():
            if id(lc) in seen:
                continue
            seen.add(id(lc))
            yield f"log6 d{node[0]} i{node[1]}", lc.cut, lc.cut.level, None

    def _log6_level(self, size: int) -> int:
        lg = math.log2(max(self.sched.n, 2))
        return max(1, min(int(self.cfg.log6_c * lg ** 6), max(size, 1)))

    def _build_log6(self):
        spec = self.sched.tree(self.sched.L)
        for d in range(spec.height + 1):
            for idx in range(2 ** d):
                lo, hi = self.slice_of_leaves(*self._tl_node_leaves(d, idx))
                coords, ids = self.coords[lo:hi], self.ids[lo:hi]
                ck = ("log6", lo, hi)
                got = self._cache.get(ck)
                if got is None:
                    cut = self._cut(coords, ids, self._log6_level(hi - lo))
                    doms = []
                    for ci in range(len(cut)):
                        pos = cut.conflict_index(ci)
                        doms.append(Dom3(coords[pos], ids[pos]))
                    cut._conf = None
                    got = Log6Cutting(cut, doms)
                    self._cache[ck] = got
                self.log6[(d, idx)] = got

    def _tl_node_leaves(self, depth, index):
        width = self.sched.m >> depth
        return index * width, (index + 1) * width

    def link_gamma(self, key: RangeKey) -> list:
        """Per cell of key's cutting, per nested cell: [(cover key, cell index), ...]."""
        rc = self.ranges[key]
        cover = node_cover(self.sched, key)
        targets = [(ck, self.range_cutting(ck).cut.apexes) for ck in cover]
        out = []
        for ci, nc in enumerate(rc.nested):
            per = []
            for ap in nc.apexes:
                links = []
                for ck, tap in targets:
                    j = first_containing(tap, ap)
                    if j is None:
                        raise ConstructionError(f"no cell of {ck} contains nested apex {ap.tolist()}", key=key)
                    links.append((ck, j))
                per.append(tuple(links))
            out.append(per)
        return out

    def link_lambda(self, key: RangeKey) -> list:
        """Per cell of a T_delta range: [((depth, index), log6 cell), ...]."""
        rc = self.ranges[key]
        cover = iterated_cover(self.sched, [key], self.sched.L)
        nodes = [last_tree_node(self.sched, k) for k in cover]
        out = []
        for ap in rc.cut.apexes:
            links = []
            for nd in nodes:
                l6 = self.log6[nd]
                j = first_containing(l6.cut.apexes, ap)
                if j is None:
                    raise ConstructionError(f"no log6 cell of node {nd} contains apex {ap.tolist()}", key=key)
                links.append((nd, j))
            out.append(tuple(links))
        return out

    # -- accounting ---------------------------------------------------------
    def unique_ranges(self):
        seen = {}
        for rc in self.ranges.values():
            seen[id(rc)] = rc
        return list(seen.values())

    def entity_count(self) -> dict:
        cells = nested = lists = fa = 0
        for rc in self.unique_ranges():
            cells += len(rc.cut)
            fa += rc.fa.size
            nested += rc.nested_cells
            fa += sum(f.size for f in rc.nested_fa)
            if rc.lists is not None:
                lists += sum(len(x[1]) for per in rc.lists for x in per)
        gamma = sum(len(l) for per_key in self.gamma.values() for per in per_key for l in per)
        lam = sum(len(l) for per_key in self.lam.values() for l in per_key)
        seen = {id(v): v for v in self.log6.values()}
        log6_cells = sum(len(v.cut) for v in seen.values())
        dom = sum(d.size for v in seen.values() for d in v.dom)
        keys = len(self.ranges)
        return {"range_keys": keys, "cells": cells, "nested_cells": nested, "explicit_list_entries": lists,
                "findany_entries": fa, "gamma_links": gamma, "lambda_links": lam, "log6_cells": log6_cells,
                "dom3_entries": dom}

    def per_tree_cells(self) -> dict:
        out = {}
        for spec in self.sched.trees:
            seen = {}
            for k, rc in self.ranges.items():
                if k.tree == spec.index:
                    seen[id(rc)] = rc
            out[spec.index] = {"cells": sum(len(rc.cut) for rc in seen.values()),
                               "nested_cells": sum(rc.nested_cells for rc in seen.values())}
        return out


def build_all_cuttings(w, coords3, ids, sched: TreeSchedule, universe: int, cfg: StoreConfig | None = None) -> CuttingStore:
    return CuttingStore(sched, w, coords3, ids, universe, cfg).build()
