"""Brute-force reference semantics for queries and cutting properties."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import QueryBox, RankedPointSet

AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


def _coords(points) -> np.ndarray:
    if isinstance(points, RankedPointSet):
        return points.ranks
    arr = np.asarray(points)
    if arr.size == 0:
        return arr.reshape(0, arr.shape[1] if arr.ndim == 2 else 0)
    return arr


def _ids(points, ids):
    if ids is not None:
        return np.asarray(ids)
    return np.arange(_coords(points).shape[0])


def oracle_mask(points, box: QueryBox) -> np.ndarray:
    pts = _coords(points)
    if box.empty or pts.shape[0] == 0:
        return np.zeros(pts.shape[0], dtype=bool)
    mask = np.ones(pts.shape[0], dtype=bool)
    for j, (a, b) in enumerate(zip(box.lo, box.hi)):
        if a != -math.inf:
            mask &= pts[:, j] >= a
        if b != math.inf:
            mask &= pts[:, j] <= b
    return mask


def oracle_report(points, box: QueryBox, ids=None) -> set[int]:
    """Ids of the points inside the box, by linear scan."""
    idv = _ids(points, ids)
    return set(idv[oracle_mask(points, box)].tolist())


def oracle_report_slow(points, box: QueryBox, ids=None) -> set[int]:
    """Pure-python scan in reverse order; an independent second oracle."""
    pts = _coords(points)
    idv = _ids(points, ids)
    out = set()
    if box.empty:
        return out
    for i in range(pts.shape[0] - 1, -1, -1):
        row = pts[i]
        if all(a <= c <= b for a, c, b in zip(box.lo, row, box.hi)):
            out.add(int(idv[i]))
    return out


def oracle_count(points, box: QueryBox) -> int:
    return int(np.count_nonzero(oracle_mask(points, box)))


def dominated_count(points3: np.ndarray, q) -> int:
    """Number of points p with p <= q componentwise."""
    if len(points3) == 0:
        return 0
    return int(np.count_nonzero(np.all(points3 <= np.asarray(q), axis=1)))


def oracle_select(points3, axis, fixed, k: int, universe: int | None = None) -> int:
    """Highest v in [0, universe] whose probe dominates at most k points.

    The probe has v on ``axis`` and the two ``fixed`` bounds on the other axes
    (in x, y, z order).
    """
    pts = _coords(points3)
    ax = AXES[axis]
    U = universe if universe is not None else pts.shape[0]
    others = [j for j in range(3) if j != ax]
    if pts.shape[0] == 0:
        return U
    mask = (pts[:, others[0]] <= fixed[0]) & (pts[:, others[1]] <= fixed[1])
    vals = np.sort(pts[mask, ax])
    if len(vals) <= k:
        return U
    return int(vals[k]) - 1


def oracle_select_enum(points3, axis, fixed, k: int, universe: int) -> int:
    """Same contract as oracle_select but by enumerating every candidate v."""
    pts = _coords(points3)
    ax = AXES[axis]
    others = [j for j in range(3) if j != ax]
    for v in range(universe, -1, -1):
        q = [0, 0, 0]
        q[ax] = v
        q[others[0]], q[others[1]] = fixed
        if dominated_count(pts, q) <= k:
            return v
    return 0


@dataclass
class CuttingReport:
    violations: list = field(default_factory=list)
    cell_count: int = 0
    probes_checked: int = 0
    mode: str = "exact"
    max_conflict: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def _maxima_2d(xs: np.ndarray, ys: np.ndarray):
    """Staircase of maximal (x, y) pairs, x ascending and y descending."""
    if len(xs) == 0:
        return xs, ys
    order = np.lexsort((-ys, -xs))  # x desc, then y desc
    sx, sy = xs[order], ys[order]
    run = np.maximum.accumulate(sy)
    keep = np.ones(len(sx), dtype=bool)
    keep[1:] = sy[1:] > run[:-1]
    return sx[keep][::-1], sy[keep][::-1]


def uncovered_minimal_probes(apexes: np.ndarray, h: int, universe: int) -> np.ndarray:
    """Minimal (x, y) grid probes at plane h outside every cell with apex z >= h."""
    if len(apexes):
        sel = apexes[apexes[:, 2] >= h]
    else:
        sel = apexes
    X, Y = _maxima_2d(sel[:, 0], sel[:, 1]) if len(sel) else (np.zeros(0, np.int64), np.zeros(0, np.int64))
    cand = []
    if len(X) == 0:
        return np.array([[1, 1]], dtype=np.int64)
    cand.append((1, Y[0] + 1))
    for i in range(len(X) - 1):
        cand.append((X[i] + 1, Y[i + 1] + 1))
    cand.append((X[-1] + 1, 1))
    arr = np.array(cand, dtype=np.int64)
    arr = np.maximum(arr, 1)
    keep = (arr[:, 0] <= universe) & (arr[:, 1] <= universe)
    return arr[keep]


def verify_cutting(points3, t: int, cutting, c1: float = 0.5, c2: float = 10,
                   exact_limit: int = 1000, samples: int = 10_000, seed: int = 0,
                   universe: int | None = None, box=None) -> CuttingReport:
    """Check the three shallow-cutting properties of ``cutting`` over ``points3``.

    ``box`` restricts coverage probes to q <= box (a nested cutting clipped to
    its parent cell is only responsible for probes inside that cell).
    """
    pts = _coords(points3).astype(np.int64)
    n = pts.shape[0]
    apexes = np.asarray(cutting.apexes, dtype=np.int64).reshape(-1, 3)
    U = universe if universe is not None else getattr(cutting, "universe", n)
    rep = CuttingReport(cell_count=len(apexes))
    K = math.floor(c1 * t)
    cap = c2 * t
    bx = np.asarray(box if box is not None else (U, U, U), dtype=np.int64)
    for ci, a in enumerate(apexes):
        size = int(np.count_nonzero(np.all(pts <= a, axis=1))) if n else 0
        rep.max_conflict = max(rep.max_conflict, size)
        if size > cap:
            rep.violations.append({"kind": "conflict", "cell": ci, "apex": a.tolist(), "size": size})
    if n <= exact_limit:
        rep.mode = "exact"
        zs = np.sort(pts[:, 2]) if n else np.zeros(0, np.int64)
        tops = sorted(set((zs - 1).tolist()) | {U})
        for h in tops:
            if h < 1 or h > bx[2]:
                continue
            probes = uncovered_minimal_probes(apexes, h, U)
            probes = probes[(probes[:, 0] <= bx[0]) & (probes[:, 1] <= bx[1])]
            if len(probes) == 0:
                continue
            rep.probes_checked += len(probes)
            below = pts[pts[:, 2] <= h]
            if len(below):
                cnt = np.count_nonzero(
                    (below[None, :, 0] <= probes[:, None, 0]) & (below[None, :, 1] <= probes[:, None, 1]), axis=1)
            else:
                cnt = np.zeros(len(probes), dtype=np.int64)
            for p, c in zip(probes[cnt <= K], cnt[cnt <= K]):
                rep.violations.append({"kind": "coverage", "probe": [int(p[0]), int(p[1]), int(h)],
                                       "count": int(c)})
    else:
        rep.mode = "sampled"
        rng = np.random.default_rng(seed)
        half = samples // 2
        probes = rng.integers(1, bx + 1, size=(samples, 3))
        # the second half sits on the shallow boundary: maximal z for a random count <= K
        for i in range(half, samples):
            x, y = probes[i, 0], probes[i, 1]
            j = int(rng.integers(0, K + 1))
            probes[i, 2] = min(bx[2], max(1, oracle_select(pts, "z", (x, y), j, U)))
        rep.probes_checked = samples
        for q in probes:
            c = dominated_count(pts, q)
            if c > K:
                continue
            if not len(apexes) or not np.any(np.all(apexes >= q, axis=1)):
                rep.violations.append({"kind": "coverage", "probe": q.tolist(), "count": c})
    return rep
