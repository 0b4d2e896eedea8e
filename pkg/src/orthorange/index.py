"""Glue between files and structures: build an index, answer raw-coordinate queries."""

from __future__ import annotations

import math
from dataclasses import asdict

import numpy as np

from .geometry import ContractError, QueryBox, RankedPointSet, canonicalize_query, to_rank_space
from .io.formats import DataError, IndexFile, PointsFile, QuerySpec
from .outer import FiveSidedStructure, GeneralStructure, OuterConfig
from .restricted import QueryStats

STRUCTURES = ("5sided", "dominance4", "general")
ACCEPTS = {"5sided": ("dom4", "5sided"), "dominance4": ("dom4",), "general": ("dom4", "5sided", "box")}


def build_index(pf: PointsFile, structure: str, cfg: OuterConfig | None = None, d: int | None = None) -> IndexFile:
    cfg = cfg or OuterConfig()
    if structure not in STRUCTURES:
        raise DataError(f"unknown structure {structure!r}")
    if d is not None and d != pf.dim:
        raise DataError(f"points file has dim={pf.dim}, requested d={d}")
    n = len(pf.ids)
    rps = to_rank_space(pf.coords, dim=pf.dim)
    if structure in ("5sided", "dominance4"):
        if pf.dim != 4:
            raise DataError(f"{structure} needs 4D points, got dim={pf.dim}")
        obj = FiveSidedStructure(rps.ranks, universe=max(n, 1), cfg=cfg)
        stats = obj.stats_json()
    else:
        try:
            obj = GeneralStructure(rps.ranks.reshape(n, pf.dim), universe=max(n, 1), cfg=cfg)
        except ContractError as exc:
            raise DataError(str(exc)) from None
        # node structures are built on first use
        stats = {"n": n, "dim": pf.dim, "lazy": True}
    return IndexFile(structure, pf.dim, pf.ids, rps.rank_maps, asdict(cfg), obj, stats)


def _check_kind(spec: QuerySpec):
    inf = -math.inf
    if spec.kind == "dom4" and any(a != inf for a in spec.lo):
        raise DataError(f"line {spec.line}: dom4 query needs -inf lower bounds")
    if spec.kind == "5sided" and any(a != inf for a in spec.lo[1:]):
        raise DataError(f"line {spec.line}: 5sided query needs -inf lower bounds on dimensions 2..4")


def answer(index: IndexFile, spec: QuerySpec) -> tuple[list[int], QueryStats]:
    """Sorted original ids inside the raw box, plus instrumentation."""
    if len(spec.lo) != index.dim:
        raise DataError(f"line {spec.line}: query has {len(spec.lo)} dimensions, index has {index.dim}")
    if spec.kind not in ACCEPTS[index.structure]:
        raise DataError(f"line {spec.line}: {index.structure} index cannot answer {spec.kind} queries")
    _check_kind(spec)
    n = len(index.ids)
    rps = RankedPointSet(np.zeros((n, index.dim), dtype=np.int64), index.rank_maps)
    box = canonicalize_query(spec.lo, spec.hi, rps)
    st = QueryStats()
    if box.empty or n == 0:
        return [], st
    if index.structure == "general":
        pos, st = index.obj.query(box, st)
    else:
        pos, st = index.obj.query(box.lo[0], box.hi[0], box.hi[1:], None, st)
    return sorted(int(index.ids[p]) for p in pos), st


def query_box_rank(structure, box: QueryBox):
    """Rank-space query on an in-memory structure (FiveSided or General)."""
    if isinstance(structure, GeneralStructure):
        return structure.query(box)
    if box.empty:
        return [], QueryStats()
    return structure.query(box.lo[0], box.hi[0], box.hi[1:])
