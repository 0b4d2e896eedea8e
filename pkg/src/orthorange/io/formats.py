"""Points/queries TSV, results JSONL and pickled index files."""

from __future__ import annotations

import json
import math
import pickle
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INDEX_MAGIC = "orthorange-index"
INDEX_VERSION = 1
QUERY_TYPES = ("dom4", "5sided", "box")

_HEADER = re.compile(r"#\s*dim=(\d+)\s+n=(\d+)")


class DataError(Exception):
    """Malformed input file or incompatible request (exit code 1)."""


@dataclass
class PointsFile:
    dim: int
    ids: np.ndarray
    coords: np.ndarray   # (n, dim) raw values, float64


def _number(tok: str, where: str) -> float:
    t = tok.strip().lower()
    if t in ("-inf", "-infinity"):
        return -math.inf
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    try:
        v = float(tok)
    except ValueError:
        raise DataError(f"{where}: not a number: {tok!r}") from None
    if math.isnan(v):
        raise DataError(f"{where}: NaN is not allowed")
    return v


def read_points(path) -> PointsFile:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataError(f"{path}: line 1: missing header '# dim=<d> n=<n>'")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise DataError(f"{path}: line 1: bad header {lines[0]!r}")
    d, n = int(m.group(1)), int(m.group(2))
    ids, rows = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != d + 1:
            raise DataError(f"{path}: line {ln}: expected {d + 1} fields, got {len(parts)}")
        try:
            ids.append(int(parts[0]))
        except ValueError:
            raise DataError(f"{path}: line {ln}: bad id {parts[0]!r}") from None
        row = [_number(t, f"{path}: line {ln}") for t in parts[1:]]
        if any(math.isinf(v) for v in row):
            raise DataError(f"{path}: line {ln}: infinite coordinate")
        rows.append(row)
    if len(rows) != n:
        raise DataError(f"{path}: header says n={n} but {len(rows)} rows follow")
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate point ids")
    coords = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    return PointsFile(d, np.array(ids, dtype=np.int64), coords)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    return str(int(f)) if f.is_integer() else repr(f)


def write_points(path, coords, ids=None):
    c = np.asarray(coords)
    n = c.shape[0]
    d = c.shape[1] if c.ndim == 2 else 0
    ids = range(n) if ids is None else ids
    with open(path, "w") as fh:
        fh.write(f"# dim={d} n={n}\n")
        for i, row in zip(ids, c):
            fh.write("\t".join([str(int(i))] + [_fmt(v) for v in row]) + "\n")


@dataclass
class QuerySpec:
    kind: str
    lo: tuple
    hi: tuple
    line: int = 0


def _tok(v) -> str:
    if v == math.inf:
        return "+inf"
    if v == -math.inf:
        return "-inf"
    return _fmt(v)


def read_queries(path, dim: int | None = None) -> list[QuerySpec]:
    out = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        kind = parts[0].strip()
        if kind not in QUERY_TYPES:
            raise DataError(f"{path}: line {ln}: unknown query type {kind!r}")
        vals = [_number(t, f"{path}: line {ln}") for t in parts[1:]]
        if len(vals) % 2:
            raise DataError(f"{path}: line {ln}: bounds must come in lo/hi pairs")
        lo, hi = tuple(vals[0::2]), tuple(vals[1::2])
        if dim is not None and len(lo) != dim:
            raise DataError(f"{path}: line {ln}: query has {len(lo)} dimensions, index has {dim}")
        out.append(QuerySpec(kind, lo, hi, ln))
    return out


def write_queries(path, queries):
    with open(path, "w") as fh:
        for q in queries:
            toks = [q.kind]
            for a, b in zip(q.lo, q.hi):
                toks += [_tok(a), _tok(b)]
            fh.write("\t".join(toks) + "\n")


def write_results(fh, records):
    for r in records:
        fh.write(json.dumps(r, sort_keys=True) + "\n")


@dataclass
class IndexFile:
    structure: str
    dim: int
    ids: np.ndarray
    rank_maps: list
    config: dict
    obj: object
    build_stats: dict = field(default_factory=dict)


def save_index(path, index: IndexFile):
    with open(path, "wb") as fh:
        pickle.dump({"magic": INDEX_MAGIC, "version": INDEX_VERSION, "index": index}, fh,
                    protocol=pickle.HIGHEST_PROTOCOL)


def load_index(path) -> IndexFile:
    try:
        with open(path, "rb") as fh:
            blob = pickle.load(fh)
    except (OSError, pickle.UnpicklingError, EOFError) as exc:
        raise DataError(f"{path}: cannot read index: {exc}") from None
    if not isinstance(blob, dict) or blob.get("magic") != INDEX_MAGIC:
        raise DataError(f"{path}: not an index file")
    if blob.get("version") != INDEX_VERSION:
        raise DataError(f"{path}: unsupported index version {blob.get('version')}")
    return blob["index"]
