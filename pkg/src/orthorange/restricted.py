"""Emptiness and reporting for 5-sided queries over one restricted instance.

A restricted instance has first coordinates in [m] (leaf indices).  A query
is leaves a1..b1 together with an upper bound q' on the last three
coordinates.
"""

from __future__ import annotations

from collections import Counter as _Tally
from dataclasses import dataclass, field

import numpy as np

from .dominance import Counter, SlowDom4
from .hierarchy import (CuttingStore, StoreConfig, TreeSchedule, init_decomposition,
                        plan_fanouts)


@dataclass
class QueryStats:
    iterations: int = 0
    findany_calls: int = 0
    findany_comparisons: int = 0
    cells_touched: int = 0
    branch: str = ""
    candidate_sizes: list = field(default_factory=list)
    iteration_comparisons: list = field(default_factory=list)
    nested_misses: list = field(default_factory=list)
    init_miss: bool = False
    dom_visits: int = 0
    scanned: int = 0
    reported: int = 0
    restricted_calls: int = 0
    recursion_depth: int = 0
    lifted_nodes: int = 0
    branches: dict = field(default_factory=dict)
    calls: list = field(default_factory=list)      # one record per restricted call
    lift_visits: dict = field(default_factory=dict)  # lifted dimension -> max nodes on one descent

    @property
    def work(self) -> int:
        return self.findany_comparisons + self.cells_touched + self.dom_visits + self.scanned + self.reported

    def note_branch(self, b: str):
        self.branch = b
        self.branches[b] = self.branches.get(b, 0) + 1

    def absorb(self, other: "QueryStats"):
        for name in ("iterations", "findany_calls", "findany_comparisons", "cells_touched", "dom_visits",
                     "scanned", "restricted_calls", "lifted_nodes"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.candidate_sizes += other.candidate_sizes
        self.iteration_comparisons += other.iteration_comparisons
        self.nested_misses += other.nested_misses
        self.init_miss = self.init_miss or other.init_miss
        self.calls += other.calls
        for k, v in other.lift_visits.items():
            self.lift_visits[k] = max(self.lift_visits.get(k, 0), v)
        self.recursion_depth = max(self.recursion_depth, other.recursion_depth)
        for k, v in other.branches.items():
            self.branches[k] = self.branches.get(k, 0) + v
        if other.branch:
            self.branch = other.branch

    def to_json(self) -> dict:
        return {"iterations": self.iterations, "findany_calls": self.findany_calls,
                "findany_comparisons": self.findany_comparisons, "cells_touched": self.cells_touched,
                "branch": self.branch, "branches": dict(self.branches), "work": self.work,
                "reported": self.reported, "restricted_calls": self.restricted_calls,
                "recursion_depth": self.recursion_depth, "candidate_sizes": self.candidate_sizes}


@dataclass
class EngineConfig:
    beta: int = 3
    nested_c: int = 16
    delta: int | None = None
    constructor: str = "sweep"
    provider: str = "array"
    fault: str | None = None


class RestrictedStructure:
    def __init__(self, w, coords3, ids, m: int, universe: int, cfg: EngineConfig | None = None):
        self.cfg = cfg or EngineConfig()
        w = np.asarray(w, dtype=np.int64)
        self.n = int(len(w))
        self.m_real = m
        self.universe = universe
        coords3 = np.asarray(coords3, dtype=np.int64).reshape(-1, 3)
        ids = np.asarray(ids, dtype=np.int64)
        if self.n and (w.min() < 1 or w.max() > m):
            raise ValueError("first coordinates must lie in [1, m]")
        self.sched: TreeSchedule | None = None
        self.store: CuttingStore | None = None
        self.slow: SlowDom4 | None = None
        if self.n == 0:
            return
        self.sched = plan_fanouts(max(m, 2), self.cfg.beta, self.n, self.cfg.nested_c, self.cfg.delta)
        scfg = StoreConfig(constructor=self.cfg.constructor, provider=self.cfg.provider, fault=self.cfg.fault)
        self.store = CuttingStore(self.sched, w, coords3, ids, universe, scfg).build()
        self.slow = SlowDom4(np.column_stack([w, coords3]), ids, value_range=(1, self.sched.m + 1),
                             shared=self._shared_dom)

    def _shared_dom(self, vr):
        # a log6-layer node holding a single cell over all of its points
        va, vb = vr
        width = vb - va
        m = self.sched.m
        if width <= 0 or m % width or (va - 1) % width:
            return None
        d = (m // width).bit_length() - 1
        got = self.store.log6.get((d, (va - 1) // width))
        if got is None or len(got.dom) != 1:
            return None
        lo, hi = self.store.slice_of_leaves((va - 1), (vb - 1))
        return got.dom[0] if got.dom[0].n == hi - lo else None

    # -- engine steps -------------------------------------------------------------
    def _fa(self, index, q, st: QueryStats):
        ctr = [0]
        hit = index.find_any(q, ctr)
        st.findany_calls += 1
        st.findany_comparisons += ctr[0]
        st.iteration_comparisons[-1] += ctr[0]
        return hit

    def init_candidates(self, a1: int, b1: int, q, st: QueryStats | None = None):
        """Returns (early_nonempty, C_2) for leaves a1..b1."""
        st = st or QueryStats()
        st.iterations += 1
        st.iteration_comparisons.append(0)
        cands = []
        for key in init_decomposition(self.sched, a1, b1):
            rc = self.store.ranges[key]
            st.cells_touched += 1
            hit = self._fa(rc.fa, q, st)
            if hit is None:
                st.init_miss = True
                return True, cands
            cands.append((key, hit))
        st.candidate_sizes.append(len(cands))
        return False, cands

    def iterate(self, cands, q, st: QueryStats | None = None):
        """One round: nested FIND-ANY on every candidate, then follow Gamma links."""
        st = st or QueryStats()
        st.iterations += 1
        st.iteration_comparisons.append(0)
        nxt = []
        for key, ci in cands:
            rc = self.store.ranges[key]
            st.cells_touched += 1
            hit = self._fa(rc.nested_fa[ci], q, st)
            if hit is None:
                st.nested_misses.append((key.tree, self.sched.tree(key.tree).u))
                return True, nxt
            nxt.extend(self.store.gamma[key][ci][hit])
        st.candidate_sizes.append(len(nxt))
        return False, nxt

    def _last_scan(self, cands, q, st: QueryStats, stop_at_first: bool):
        st.iterations += 1
        st.iteration_comparisons.append(0)
        qx, qy, qz = q
        found = []
        for key, ci in cands:
            rc = self.store.ranges[key]
            st.cells_touched += 1
            hit = self._fa(rc.nested_fa[ci], q, st)
            if hit is None:
                st.nested_misses.append((key.tree, self.sched.tree(key.tree).u))
                return True, found
            xyz, pids = rc.lists[ci][hit]
            st.scanned += len(pids)
            sel = np.flatnonzero((xyz[:, 0] <= qx) & (xyz[:, 1] <= qy) & (xyz[:, 2] <= qz))
            if len(sel):
                if stop_at_first:
                    found.append(int(pids[sel[0]]))
                    return True, found
                found.extend(pids[sel].tolist())
        return bool(found), found

    # -- queries --------------------------------------------------------------------
    def _mark(self, st):
        return (st.iterations, len(st.candidate_sizes), len(st.nested_misses))

    def _record(self, kind, a1, b1, q, st, mark, init_miss):
        st.calls.append({"kind": kind, "a1": a1, "b1": b1, "q": tuple(int(v) for v in q),
                         "iterations": st.iterations - mark[0], "sizes": st.candidate_sizes[mark[1]:],
                         "misses": st.nested_misses[mark[2]:], "init_miss": init_miss,
                         "init_level": self.sched.tree(2).t, "branch": st.branch, "n": self.n, "inst": self})

    def count(self, a1: int, b1: int, q) -> int:
        """Brute-force size of a restricted query (used to certify early stops)."""
        w = self.slow.c[:, 0]
        c = self.slow.c
        m = (w >= a1) & (w <= b1) & (c[:, 1] <= q[0]) & (c[:, 2] <= q[1]) & (c[:, 3] <= q[2])
        return int(np.count_nonzero(m))

    def emptiness(self, a1: int, b1: int, q, st: QueryStats | None = None):
        """True iff some point has leaf in [a1, b1] and last three coordinates <= q."""
        st = st or QueryStats()
        st.restricted_calls += 1
        if self.n == 0 or a1 > b1:
            st.note_branch("scan")
            return False, st
        a1, b1 = max(a1, 1), min(b1, self.m_real)
        if a1 > b1:
            st.note_branch("scan")
            return False, st
        q = tuple(int(v) for v in q)
        mark = self._mark(st)
        early, cands = self.init_candidates(a1, b1, q, st)
        init_miss = early
        while not early and cands and cands[0][0].tree < self.sched.L:
            early, cands = self.iterate(cands, q, st)
        if early:
            st.note_branch("early")
            nonempty = True
        else:
            nonempty, _ = self._last_scan(cands, q, st, stop_at_first=True)
            st.note_branch("early" if len(st.nested_misses) > mark[2] else "scan")
        self._record("emptiness", a1, b1, q, st, mark, init_miss)
        return nonempty, st

    def report(self, a1: int, b1: int, q, st: QueryStats | None = None, out: list | None = None):
        """Ids with leaf in [a1, b1] and last three coordinates <= q (list, no duplicates)."""
        st = st or QueryStats()
        out = [] if out is None else out
        st.restricted_calls += 1
        if self.n == 0:
            st.note_branch("scan")
            return out, st
        a1, b1 = max(a1, 1), min(b1, self.m_real)
        if a1 > b1:
            st.note_branch("scan")
            return out, st
        q = tuple(int(v) for v in q)
        delta = self.sched.delta
        mark = self._mark(st)
        early, cands = self.init_candidates(a1, b1, q, st)
        init_miss = early
        while not early and cands and cands[0][0].tree < delta:
            early, cands = self.iterate(cands, q, st)
        start = len(out)
        ctr = Counter()
        if early:
            st.note_branch("slow")
            self.slow.report_range(a1, b1, q, out, ctr)
        else:
            st.note_branch("lambda")
            for key, ci in cands:
                for node, j in self.store.lam[key][ci]:
                    st.cells_touched += 1
                    self.store.log6[node].dom[j].query(q, out, ctr)
        st.dom_visits += ctr.visits
        st.scanned += ctr.scanned
        st.reported += len(out) - start
        self._record("report", a1, b1, q, st, mark, init_miss)
        return out, st

    # -- accounting -----------------------------------------------------------------
    def entity_count(self) -> dict:
        if self.n == 0:
            return {"points": 0}
        d = self.store.entity_count()
        d["slow_entries"] = self.slow.size
        d["points"] = self.n
        return d

    def total_entities(self) -> int:
        d = self.entity_count()
        return sum(v for k, v in d.items() if k not in ("range_keys",))


def build_restricted(w, coords3, ids, m: int, universe: int, cfg: EngineConfig | None = None) -> RestrictedStructure:
    return RestrictedStructure(w, coords3, ids, m, universe, cfg)


def branch_tally(stats_list) -> dict:
    t = _Tally()
    for s in stats_list:
        t.update(s.branches)
    return dict(t)
