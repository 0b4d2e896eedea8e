"""Benchmark ladder: build/query timings, instrumented work and trend fits."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .io.datasets import fixture, random_query
from .outer import FiveSidedStructure, GeneralStructure, OuterConfig
from .restricted import QueryStats

BENCH_STRUCTURES = ("5sided", "dominance4", "general")
_KIND = {"5sided": "5sided", "dominance4": "dom4", "general": "box"}

COLUMNS = ["n", "structure", "build_ms", "query_p50_ms", "findany_calls_mean", "iterations_mean",
           "cells_total", "work_mean", "k_mean", "fa_per_iteration_max", "entities_per_nlogn",
           "fit_work_a", "fit_work_b", "fit_work_r2", "fit_exponent", "fit_exponent_r2",
           "fit_fa_a", "fit_fa_b", "fit_fa_r2"]


@dataclass
class Sample:
    n: int
    k: int
    work: int
    ms: float
    stats: QueryStats


def r_squared(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - np.asarray(yhat, dtype=float)) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def fit_work(samples) -> dict:
    """Least squares for work = a * lg n * lglg n + b * k (no intercept)."""
    lg = np.array([math.log2(s.n) for s in samples])
    X = np.column_stack([lg * np.log2(lg), [s.k for s in samples]])
    y = np.array([s.work for s in samples], dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return {"a": float(coef[0]), "b": float(coef[1]), "r2": r_squared(y, X @ coef)}


def fit_exponent(ns, values) -> dict:
    """log-log slope of ``values`` against n."""
    x, y = np.log2(np.asarray(ns, float)), np.log2(np.maximum(np.asarray(values, float), 1e-12))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return {"exponent": float(coef[0]), "r2": r_squared(y, A @ coef)}


def fit_fa_envelope(ns, maxima) -> dict:
    """Line a' * lg n + b' through the per-size maxima, lifted so every maximum lies on or below it."""
    lg = np.log2(np.asarray(ns, float))
    y = np.asarray(maxima, float)
    A = np.column_stack([lg, np.ones_like(lg)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r2 = r_squared(y, A @ coef)
    b = float(coef[1] + max(0.0, float(np.max(y - A @ coef))))
    return {"a": float(coef[0]), "b": b, "r2": r2}


def _build(structure, ranks, cfg):
    n = len(ranks)
    if structure == "general":
        return GeneralStructure(ranks, universe=max(n, 1), cfg=cfg)
    return FiveSidedStructure(ranks, universe=max(n, 1), cfg=cfg)


def _cells(s) -> int:
    if isinstance(s, GeneralStructure):
        return 0
    return s.stats_json()["cells_total"]


def run_bench(ladder, repetitions: int = 1, structures=("5sided",), queries: int = 200, seed: int = 0,
              cfg: OuterConfig | None = None, distribution: str = "uniform"):
    """Returns (rows, samples by structure). Rows carry the fits of their structure."""
    cfg = cfg or OuterConfig()
    rows, samples = [], {}
    for structure in structures:
        per = samples.setdefault(structure, [])
        srows = []
        for n in ladder:
            ranks = fixture(n, distribution, seed, d=4).ranks
            best = math.inf
            for _ in range(max(1, repetitions)):
                t0 = time.perf_counter()
                s = _build(structure, ranks, cfg)
                best = min(best, (time.perf_counter() - t0) * 1e3)
            rng = np.random.default_rng(seed + n)
            local = []
            for _ in range(queries):
                box = random_query(_KIND[structure], max(n, 1), 4, rng)
                t0 = time.perf_counter()
                if structure == "general":
                    got, st = s.query(box)
                else:
                    got, st = s.query(box.lo[0], box.hi[0], box.hi[1:])
                local.append(Sample(n, len(got), st.work, (time.perf_counter() - t0) * 1e3, st))
            per.extend(local)
            fa_max = max((c for x in local for c in x.stats.iteration_comparisons), default=0)
            ent = s.total_entities() if isinstance(s, FiveSidedStructure) else float("nan")
            srows.append({
                "n": n, "structure": structure, "build_ms": round(best, 3),
                "query_p50_ms": round(float(np.median([x.ms for x in local])), 4) if local else 0.0,
                "findany_calls_mean": float(np.mean([x.stats.findany_calls for x in local])) if local else 0.0,
                "iterations_mean": float(np.mean([x.stats.iterations for x in local])) if local else 0.0,
                "cells_total": _cells(s), "work_mean": float(np.mean([x.work for x in local])) if local else 0.0,
                "k_mean": float(np.mean([x.k for x in local])) if local else 0.0,
                "fa_per_iteration_max": fa_max,
                "entities_per_nlogn": ent / (n * math.log2(n)) if n > 1 else float("nan"),
            })
        fits = fit_all(per, srows)
        for r in srows:
            r.update(fits)
        rows.extend(srows)
    return rows, samples


def fit_all(samples, rows) -> dict:
    out = {k: "" for k in COLUMNS if k.startswith("fit_")}
    ns = [r["n"] for r in rows]
    if len(set(ns)) < 2 or not samples:
        return out
    w = fit_work(samples)
    # cost exponent of the output-independent part of the work
    base = [max(r["work_mean"] - w["b"] * r["k_mean"], 1.0) for r in rows]
    e = fit_exponent(ns, base)
    fa = fit_fa_envelope(ns, [r["fa_per_iteration_max"] for r in rows])
    out.update({"fit_work_a": w["a"], "fit_work_b": w["b"], "fit_work_r2": w["r2"],
                "fit_exponent": e["exponent"], "fit_exponent_r2": e["r2"],
                "fit_fa_a": fa["a"], "fit_fa_b": fa["b"], "fit_fa_r2": fa["r2"]})
    return out


def write_csv(fh, rows):
    wr = csv.DictWriter(fh, fieldnames=COLUMNS, extrasaction="ignore", lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
