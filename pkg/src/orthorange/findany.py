"""FIND-ANY: locate some cell of a cutting that contains a 3D point.

Cells are sorted by apex z descending and arranged in a segment tree.  Each
node keeps the 2D staircase (maxima in x, y) of its cells' apexes, so a node
holds a cell containing q iff the first staircase step with x >= q.x has
y >= q.y.  The z-prefix of cells with apex z >= q.z splits into O(log g)
nodes, giving O(log^2 g) comparisons.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

LEAF = 4


def _stair(ax, ay, ids):
    order = sorted(range(len(ax)), key=lambda i: (-ax[i], -ay[i], ids[i]))
    xs, ys, cs = [], [], []
    best = None
    for i in order:
        if best is None or ay[i] > best:
            xs.append(ax[i])
            ys.append(ay[i])
            cs.append(ids[i])
            best = ay[i]
    xs.reverse()
    ys.reverse()
    cs.reverse()
    return xs, ys, cs


@dataclass
class _Node:
    lo: int
    hi: int
    left: int
    right: int
    xs: list
    ys: list
    cs: list


class FindAnyIndex:
    def __init__(self, apexes):
        ap = np.asarray(apexes, dtype=np.int64).reshape(-1, 3)
        self.g = int(ap.shape[0])
        order = np.argsort(-ap[:, 2], kind="stable")
        self.negz = (-ap[order, 2]).tolist()
        self.ax = ap[order, 0].tolist()
        self.ay = ap[order, 1].tolist()
        self.cid = order.tolist()
        self.nodes: list[_Node] = []
        self.root = self._build(0, self.g) if self.g else -1

    def _build(self, lo, hi):
        idx = len(self.nodes)
        self.nodes.append(None)
        if hi - lo <= LEAF:
            node = _Node(lo, hi, -1, -1, [], [], [])
        else:
            mid = (lo + hi) // 2
            left = self._build(lo, mid)
            right = self._build(mid, hi)
            xs, ys, cs = _stair(self.ax[lo:hi], self.ay[lo:hi], self.cid[lo:hi])
            node = _Node(lo, hi, left, right, xs, ys, cs)
        self.nodes[idx] = node
        return idx

    @property
    def size(self) -> int:
        """Stored entries: one per cell plus every staircase step."""
        return self.g + sum(len(nd.xs) for nd in self.nodes)

    def find_any(self, q, counter=None):
        """Some cell id whose apex is >= q componentwise, or None."""
        if self.g == 0:
            if counter is not None:
                counter[0] += 1
            return None
        qx, qy, qz = int(q[0]), int(q[1]), int(q[2])
        comps = 1
        j = bisect.bisect_right(self.negz, -qz)
        comps += max(1, self.g).bit_length()
        found = None
        stack = [self.root] if j > 0 else []
        nodes = self.nodes
        while stack and found is None:
            nd = nodes[stack.pop()]
            comps += 1
            if nd.left < 0:
                for p in range(nd.lo, min(nd.hi, j)):
                    comps += 1
                    if self.ax[p] >= qx and self.ay[p] >= qy:
                        found = self.cid[p]
                        break
                continue
            if nd.hi <= j:
                xs = nd.xs
                p = bisect.bisect_left(xs, qx)
                comps += len(xs).bit_length() + 1
                if p < len(xs) and nd.ys[p] >= qy:
                    found = nd.cs[p]
                continue
            mid = nodes[nd.left].hi
            if mid < j:
                stack.append(nd.right)
            stack.append(nd.left)
        if counter is not None:
            counter[0] += comps
        return found


def build_find_any(cells_or_apexes) -> FindAnyIndex:
    if hasattr(cells_or_apexes, "apexes"):
        return FindAnyIndex(cells_or_apexes.apexes)
    if len(cells_or_apexes) and hasattr(cells_or_apexes[0], "apex"):
        return FindAnyIndex([c.apex for c in cells_or_apexes])
    return FindAnyIndex(cells_or_apexes)


def find_any(index: FindAnyIndex, q, counter=None):
    return index.find_any(q, counter)
