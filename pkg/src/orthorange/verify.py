"""End-to-end verification: structures against the oracle plus structural invariants.

Failures carry a minimized reproduction (points + query or probe) found by
delta debugging over the offending point set.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .cutting import ConstructionError, build_cutting_sweep, build_cutting_naive
from .io.datasets import random_query
from .oracle import oracle_report, verify_cutting
from .outer import FiveSidedStructure, GeneralStructure, OuterConfig
from .restricted import QueryStats


@dataclass
class VerifyReport:
    checks: Counter = field(default_factory=Counter)
    failures: list = field(default_factory=list)
    repro: dict | None = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, kind: str, **info):
        self.failures.append({"kind": kind, **info})

    def to_json(self) -> dict:
        return {"ok": self.ok, "checks": dict(self.checks), "failures": self.failures[:20],
                "failure_count": len(self.failures), "repro": self.repro}


def ddmin(items: list, still_fails) -> list:
    """Shrink ``items`` while ``still_fails(subset)`` holds (Zeller's delta debugging)."""
    cur = list(items)
    chunks = 2
    while len(cur) >= 2:
        size = math.ceil(len(cur) / chunks)
        reduced = False
        for s in range(0, len(cur), size):
            rest = cur[:s] + cur[s + size:]
            if rest and still_fails(rest):
                cur = rest
                chunks = max(chunks - 1, 2)
                reduced = True
                break
        if not reduced:
            if chunks >= len(cur):
                break
            chunks = min(len(cur), chunks * 2)
    return cur


def _fault_cut(pts, t, universe, fault, box, constructor="sweep"):
    build = build_cutting_naive if constructor == "naive" else build_cutting_sweep
    c = build(pts, t, universe=universe)
    if fault == "drop-cell" and len(c) > 1:
        c = c.drop_cell(len(c) - 1)
    if box is not None:
        c.apexes = np.minimum(c.apexes, np.asarray(box, dtype=np.int64))
    return c


def minimize_cutting(pts: np.ndarray, t: int, universe: int, box, fault, c1, c2, constructor="sweep") -> dict:
    """Delta-debug the point set, halving the level t whenever the failure survives it."""
    def fails(sub, tt):
        c = _fault_cut(sub, tt, universe, fault, box, constructor)
        return not verify_cutting(sub, tt, c, c1=c1, c2=c2, universe=universe, box=box).ok

    cur = pts
    while True:
        keep = ddmin(list(range(len(cur))), lambda idx: fails(cur[idx], t))
        cur = cur[keep]
        if t <= 1 or not fails(cur, t // 2):
            break
        t //= 2
    c = _fault_cut(cur, t, universe, fault, box, constructor)
    rep = verify_cutting(cur, t, c, c1=c1, c2=c2, universe=universe, box=box)
    return {"kind": "cutting", "t": t, "universe": universe, "box": list(box) if box is not None else None,
            "points": cur.tolist(), "apexes": c.apexes.tolist(), "violation": rep.violations[:1],
            "original_points": int(len(pts))}


def minimize_query(ranks: np.ndarray, box, build, universe: int) -> dict:
    def fails(idx):
        sub = ranks[idx]
        s = build(sub)
        got, _ = _run(s, box)
        exp = oracle_report(sub, box)
        return set(got) != exp or len(got) != len(set(got))

    keep = ddmin(list(range(len(ranks))), fails)
    sub = ranks[keep]
    got, _ = _run(build(sub), box)
    return {"kind": "query", "universe": universe, "points": sub.tolist(), "query": {"lo": list(box.lo),
            "hi": list(box.hi)}, "got": sorted(got), "expected": sorted(oracle_report(sub, box)),
            "original_points": int(len(ranks))}


def _run(s, box):
    if isinstance(s, GeneralStructure):
        return s.query(box)
    return s.query(box.lo[0], box.hi[0], box.hi[1:])


def check_calls(st: QueryStats, rep: VerifyReport, c1: float):
    """Candidate growth, iteration count and early-stop certification on every restricted call."""
    for call in st.calls:
        inst = call["inst"]
        sched = inst.sched
        c0 = 2 * sched.tree(2).height
        beta = sched.beta
        for j, size in enumerate(call["sizes"]):
            i = j + 2
            rep.checks["candidate_growth"] += 1
            if size > c0 * beta ** (i + 1) - 1:
                rep.fail("candidate_growth", i=i, size=size, bound=c0 * beta ** (i + 1) - 1)
        lg = math.log2(max(call["n"], 4))
        rep.checks["iteration_count"] += 1
        if call["iterations"] > math.log(lg, 3) + 2 + 1e-9:
            rep.fail("iteration_count", iterations=call["iterations"], n=call["n"])
        if call["misses"] or call["init_miss"]:
            cnt = inst.count(call["a1"], call["b1"], call["q"])
            for tree, u in call["misses"]:
                rep.checks["early_stop"] += 1
                if cnt < c1 * u:
                    rep.fail("early_stop", tree=tree, u=u, count=cnt, q=list(call["q"]))
            if call["init_miss"]:
                rep.checks["early_stop"] += 1
                if cnt < c1 * call["init_level"]:
                    rep.fail("early_stop", tree=2, t=call["init_level"], count=cnt, q=list(call["q"]))


def check_structure(fs: FiveSidedStructure, rep: VerifyReport, c1: float, c2: float, fault=None,
                    constructor="sweep", max_cuttings: int | None = None):
    """Partition invariant, link sizes and verify_cutting over every stored cutting."""
    stack = [fs]
    done = 0
    while stack:
        s = stack.pop()
        if s.flat or s.restricted.store is None:
            continue
        rep.checks["partition"] += 1
        sizes = [s.offsets[j + 1] - s.offsets[j] for j in range(len(s.offsets) - 1)]
        if sum(sizes) != s.n or max(sizes) > 2 * max(1, min(sizes)):
            rep.fail("partition", sizes=sizes)
        w = s.restricted.slow.c[:, 0]
        if w.min() < 1 or w.max() > s.m:
            rep.fail("partition", detail="leaf index out of range")
        stack.extend(s.bottoms)
        store = s.restricted.store
        for per_key in store.gamma.values():
            for per in per_key:
                for links in per:
                    rep.checks["gamma_size"] += 1
                    if len(links) > 5:
                        rep.fail("gamma_size", size=len(links))
        for label, cut, level, box in store.iter_cuttings():
            if max_cuttings is not None and done >= max_cuttings:
                continue
            done += 1
            rep.checks["cutting"] += 1
            r = verify_cutting(cut.coords, level, cut, c1=c1, c2=c2, universe=cut.universe, box=box)
            if not r.ok:
                rep.fail("cutting", label=label, violations=r.violations[:3])
                if rep.repro is None:
                    rep.repro = minimize_cutting(cut.coords, level, cut.universe, box, fault, c1, c2, constructor)
                    rep.repro["label"] = label


def verify_points(ranks: np.ndarray, queries: int = 200, seed: int = 0, cfg: OuterConfig | None = None,
                  c1: float = 0.5, c2: float = 10, check_cuttings: bool = True) -> VerifyReport:
    """Build every structure over rank-space points, compare against the oracle, check invariants."""
    cfg = cfg or OuterConfig()
    rep = VerifyReport()
    ranks = np.asarray(ranks, dtype=np.int64)
    n, d = ranks.shape
    U = max(n, 1)
    if d < 4:
        rep.fail("dimension", detail=f"need d >= 4, got {d}")
        return rep
    rng = np.random.default_rng(seed)
    P4 = ranks[:, :4]
    try:
        fs = FiveSidedStructure(P4, universe=U, cfg=cfg)
        gen = GeneralStructure(ranks, universe=U, cfg=cfg)
    except ConstructionError as exc:
        rep.fail("construction", detail=str(exc))
        return rep
    rep.checks["structures"] += 2
    kinds = [("dom4", fs, P4, 4), ("5sided", fs, P4, 4), ("box", gen, ranks, d)]
    if d > 4:
        # 4D boxes on the first four coordinates go through a 4D general structure
        kinds.insert(2, ("box4", GeneralStructure(P4, universe=U, cfg=cfg), P4, 4))
    for kind, s, pts, dd in kinds:
        for _ in range(queries):
            box = random_query("box" if kind == "box4" else kind, U, dd, rng)
            got, st = _run(s, box)
            exp = oracle_report(pts, box)
            rep.checks[f"query_{kind}"] += 1
            if len(got) != len(set(got)) or set(got) != exp:
                rep.fail("query", type=kind, lo=list(box.lo), hi=list(box.hi),
                         missing=len(exp - set(got)), extra=len(set(got) - exp), dupes=len(got) - len(set(got)))
                if rep.repro is None:
                    builder = ((lambda sub: FiveSidedStructure(sub, universe=U, cfg=cfg)) if s is fs
                               else (lambda sub: GeneralStructure(sub, universe=U, cfg=cfg)))
                    rep.repro = minimize_query(pts, box, builder, U)
            check_calls(st, rep, c1)
            if kind == "5sided":
                rep.checks["emptiness"] += 1
                if fs.is_empty(box.lo[0], box.hi[0], box.hi[1:]) != (not exp):
                    rep.fail("emptiness", lo=list(box.lo), hi=list(box.hi))
    if check_cuttings:
        check_structure(fs, rep, c1, c2, cfg.fault, cfg.constructor)
    return rep
