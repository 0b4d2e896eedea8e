"""3D dominance reporting, the slow 4D dominance structure, and one-reporting."""

from __future__ import annotations

import bisect
import math

import numpy as np

from .geometry import QueryBox
from .oracle import oracle_mask

BLOCK = 32    # Dom3 / SlowDom4 tree leaves at or below this size are scanned
FANOUT = 4    # Dom3 z-tree fanout
BUCKET = 8    # priority-search-tree buckets


class Counter:
    """Mutable work counter shared by one query."""

    __slots__ = ("visits", "scanned", "nodes")

    def __init__(self):
        self.visits = 0
        self.scanned = 0
        self.nodes = 0   # first-coordinate tree nodes visited by SlowDom4

    @property
    def total(self):
        return self.visits + self.scanned


class PST:
    """Priority search tree for 2D dominance (x <= qx and y <= qy).

    Points are sorted by y and the index range is split in halves.  Each node
    keeps the unused point of minimum x in its range, so x is heap-ordered
    along every root-to-leaf path.  Built level by level with vectorized
    argmins; the last level holds scanned buckets.
    """

    __slots__ = ("n", "H", "P", "xs", "ys", "ids", "levels", "buckets")

    def __init__(self, xs: np.ndarray, ys: np.ndarray, ids: np.ndarray):
        self.n = n = len(xs)
        order = np.argsort(ys, kind="stable")
        xs, ys, ids = xs[order], ys[order], ids[order]
        self.xs = xs.tolist()
        self.ys = ys.tolist()
        self.ids = ids.tolist()
        H = 0
        while (n >> H) > BUCKET:
            H += 1
        self.H = H
        b = -(-n // (1 << H)) if n else 1
        self.P = P = b << H
        big = np.iinfo(np.int64).max
        xpad = np.full(P, big, dtype=np.int64)
        xpad[:n] = xs
        used = np.zeros(P, dtype=bool)
        used[n:] = True
        self.levels = []
        for lv in range(H):
            segs = 1 << lv
            vals = np.where(used, big, xpad).reshape(segs, -1)
            am = np.argmin(vals, axis=1)
            mins = vals[np.arange(segs), am]
            pt = am + np.arange(segs) * (P // segs)
            pt[mins == big] = -1
            used[pt[pt >= 0]] = True
            self.levels.append(pt.tolist())
        rest = np.flatnonzero(~used)
        bidx = rest // b
        self.buckets = [[] for _ in range(1 << H)]
        for i, bi in zip(rest.tolist(), bidx.tolist()):
            self.buckets[bi].append(i)

    def query(self, qx, qy, out: list, ctr: Counter):
        if self.n == 0:
            return
        py = bisect.bisect_right(self.ys, qy)
        if py == 0:
            ctr.visits += 1
            return
        xs, ids, H, P = self.xs, self.ids, self.H, self.P
        stack = [(0, 0)]
        while stack:
            lv, seg = stack.pop()
            ctr.visits += 1
            if seg * (P >> lv) >= py:
                continue
            if lv == H:
                bk = self.buckets[seg]
                ctr.scanned += len(bk)
                for i in bk:
                    if i < py and xs[i] <= qx:
                        out.append(ids[i])
                continue
            p = self.levels[lv][seg]
            if p < 0 or xs[p] > qx:
                continue
            if p < py:
                out.append(ids[p])
            stack.append((lv + 1, 2 * seg + 1))
            stack.append((lv + 1, 2 * seg))

    @property
    def size(self):
        return self.n + sum(len(lv) for lv in self.levels)


class Dom3:
    """3D dominance reporting: a z-ordered tree of fanout FANOUT whose nodes hold PSTs."""

    def __init__(self, coords3, ids=None):
        c = np.asarray(coords3, dtype=np.int64).reshape(-1, 3)
        if ids is None:
            ids = np.arange(c.shape[0], dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        order = np.argsort(c[:, 2], kind="stable")
        self.xs = c[order, 0]
        self.ys = c[order, 1]
        self.zs = c[order, 2]
        self.ids = ids[order]
        self.zlist = self.zs.tolist()
        self.n = c.shape[0]
        self.tree: dict = {}
        self._build(0, self.n)

    @staticmethod
    def _split(lo, hi):
        w = hi - lo
        return [lo + (w * k) // FANOUT for k in range(FANOUT + 1)]

    def _build(self, lo, hi):
        if hi - lo <= BLOCK:
            return
        self.tree[(lo, hi)] = PST(self.xs[lo:hi], self.ys[lo:hi], self.ids[lo:hi])
        cuts = self._split(lo, hi)
        for k in range(FANOUT):
            self._build(cuts[k], cuts[k + 1])

    @property
    def size(self):
        return self.n + sum(p.size for p in self.tree.values())

    def query(self, q, out: list | None = None, ctr: Counter | None = None) -> list:
        """Append ids of points <= q componentwise to ``out``."""
        if out is None:
            out = []
        if ctr is None:
            ctr = Counter()
        ctr.visits += 1
        if self.n == 0:
            return out
        qx, qy, qz = q
        j = bisect.bisect_right(self.zlist, qz)
        if j == 0:
            return out
        lo, hi = 0, self.n
        # walk down the single path to position j; children left of it are whole
        while True:
            ctr.visits += 1
            pst = self.tree.get((lo, hi))
            if pst is None:
                end = min(hi, j)
                ctr.scanned += end - lo
                if end > lo:
                    sel = np.flatnonzero((self.xs[lo:end] <= qx) & (self.ys[lo:end] <= qy))
                    if len(sel):
                        out.extend(self.ids[lo + sel].tolist())
                return out
            if hi <= j:
                pst.query(qx, qy, out, ctr)
                return out
            cuts = self._split(lo, hi)
            k = 0
            while cuts[k + 1] <= j:
                a, b = cuts[k], cuts[k + 1]
                sub = self.tree.get((a, b))
                if sub is None:
                    ctr.visits += 1
                    ctr.scanned += b - a
                    sel = np.flatnonzero((self.xs[a:b] <= qx) & (self.ys[a:b] <= qy))
                    if len(sel):
                        out.extend(self.ids[a + sel].tolist())
                else:
                    ctr.visits += 1
                    sub.query(qx, qy, out, ctr)
                k += 1
            if cuts[k] >= j:
                return out
            lo, hi = cuts[k], cuts[k + 1]


def build_dom3(coords3, ids=None) -> Dom3:
    return Dom3(coords3, ids)


def report_dom3(d: Dom3, q, ctr: Counter | None = None) -> set[int]:
    return set(d.query(q, [], ctr))


class SlowDom4:
    """Tree over first-coordinate values with a Dom3 on each node's last three coordinates.

    Nodes halve a half-open value interval.  With ``value_range=(1, m + 1)``
    and m a power of two the nodes are the dyadic leaf intervals; ``shared``
    may then hand back an existing Dom3 over exactly a node's points, which is
    used instead of building a copy.  Nodes of at most BLOCK points are scanned.
    """

    def __init__(self, coords4, ids=None, value_range=None, shared=None):
        c = np.asarray(coords4, dtype=np.int64).reshape(-1, 4)
        if ids is None:
            ids = np.arange(c.shape[0], dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        order = np.lexsort((c[:, 3], c[:, 2], c[:, 1], c[:, 0]))
        self.c = c[order]
        self.ids = ids[order]
        self.keys = self.c[:, 0].tolist()
        self.n = c.shape[0]
        if value_range is None:
            value_range = (int(self.c[0, 0]), int(self.c[-1, 0]) + 1) if self.n else (0, 1)
        self.root = value_range
        self.nodes: dict = {}
        self.shared_keys: set = set()
        if self.n:
            self._build(*value_range, shared)

    def _span(self, va, vb):
        return bisect.bisect_left(self.keys, va), bisect.bisect_left(self.keys, vb)

    def _build(self, va, vb, shared):
        lo, hi = self._span(va, vb)
        if hi - lo <= BLOCK:
            return
        d = shared((va, vb)) if shared is not None else None
        if d is None:
            d = Dom3(self.c[lo:hi, 1:], self.ids[lo:hi])
        else:
            self.shared_keys.add((va, vb))
        self.nodes[(va, vb)] = d
        if vb - va > 1:
            mid = (va + vb) // 2
            self._build(va, mid, shared)
            self._build(mid, vb, shared)

    @property
    def stored_points(self) -> int:
        return sum(d.n for d in self.nodes.values())

    @property
    def size(self) -> int:
        """Entries owned by this structure (shared Dom3s are counted by their owner)."""
        return self.n + sum(d.size for k, d in self.nodes.items() if k not in self.shared_keys)

    def _scan(self, s, e, q3, out, ctr):
        ctr.scanned += e - s
        blk = self.c[s:e]
        sel = np.flatnonzero((blk[:, 1] <= q3[0]) & (blk[:, 2] <= q3[1]) & (blk[:, 3] <= q3[2]))
        if len(sel):
            out.extend(self.ids[s + sel].tolist())

    def report_positions(self, lo: int, hi: int, q3, out: list, ctr: Counter):
        """Points at sorted positions [lo, hi) that are <= q3 on the last three coordinates."""
        if lo >= hi:
            return out
        stack = [self.root]
        while stack:
            va, vb = stack.pop()
            a, b = self._span(va, vb)
            if b <= lo or a >= hi or a == b:
                continue
            ctr.visits += 1
            ctr.nodes += 1
            d = self.nodes.get((va, vb))
            if lo <= a and b <= hi:
                if d is None:
                    self._scan(a, b, q3, out, ctr)
                else:
                    d.query(q3, out, ctr)
                continue
            if d is None or vb - va == 1:
                self._scan(max(a, lo), min(b, hi), q3, out, ctr)
                continue
            mid = (va + vb) // 2
            stack.append((mid, vb))
            stack.append((va, mid))
        return out

    def report_range(self, a1, b1, q3, out: list | None = None, ctr: Counter | None = None) -> list:
        """Points with a1 <= first <= b1 and last three <= q3."""
        if out is None:
            out = []
        if ctr is None:
            ctr = Counter()
        lo = bisect.bisect_left(self.keys, a1) if a1 != -math.inf else 0
        hi = bisect.bisect_right(self.keys, b1) if b1 != math.inf else self.n
        return self.report_positions(lo, hi, q3, out, ctr)

    def report(self, q4, ctr: Counter | None = None) -> set[int]:
        return set(self.report_range(-math.inf, q4[0], q4[1:], [], ctr))


def build_slow4(coords4, ids=None) -> SlowDom4:
    return SlowDom4(coords4, ids)


def report_slow4(s: SlowDom4, q4, ctr: Counter | None = None) -> set[int]:
    return s.report(q4, ctr)


def one_report(points, box: QueryBox):
    """Index of some point inside the box, or None (scan-based)."""
    pts = np.asarray(points)
    if pts.size == 0:
        return None
    hit = np.flatnonzero(oracle_mask(pts, box))
    return int(hit[0]) if len(hit) else None


def first_containing(apexes: np.ndarray, p) -> int | None:
    """Index of the first apex that is >= p componentwise (a cell containing p)."""
    if len(apexes) == 0:
        return None
    hit = np.flatnonzero((apexes[:, 0] >= p[0]) & (apexes[:, 1] >= p[1]) & (apexes[:, 2] >= p[2]))
    return int(hit[0]) if len(hit) else None
