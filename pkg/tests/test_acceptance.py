"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from orthorange.bench import fit_fa_envelope, run_bench
from orthorange.cutting import build_cutting_naive, build_cutting_sweep, cell_bound, sweep_cost
from orthorange.geometry import QueryBox
from orthorange.hierarchy import all_keys, key_leaves, node_cover, node_leaves, plan_fanouts
from orthorange.io.cli import main
from orthorange.io.datasets import DISTRIBUTIONS, fixture, generate_points, random_query
from orthorange.oracle import oracle_count, oracle_report, uncovered_minimal_probes, verify_cutting
from orthorange.outer import FiveSidedStructure, GeneralStructure, general_entities, general_entities_estimate
from orthorange.restricted import QueryStats

from conftest import lambda_union_samples, nested_union_samples, perm_points, record, restricted_instance

pytestmark = pytest.mark.slow
INF = math.inf
LADDER = [2 ** i for i in range(9, 16)]


def lglg(n):
    return math.log2(math.log2(n))


# 1 ---------------------------------------------------------------------------

def test_criterion_1_oracle_exactness():
    t0 = time.perf_counter()
    bad = dupes = total = 0
    for n in (2 ** 9, 2 ** 10, 2 ** 12, 2 ** 14):
        for dist in DISTRIBUTIONS:
            for seed in (1, 2, 3):
                r5 = fixture(n, dist, seed, d=5).ranks
                r4 = r5[:, :4]
                fs = FiveSidedStructure(r4, universe=n)
                g4 = GeneralStructure(r4, universe=n)
                g5 = GeneralStructure(r5, universe=n)
                rng = np.random.default_rng(seed * 7919 + n)
                for kind, s, pts, d, qkind in (("dom4", fs, r4, 4, "dom4"), ("5sided", fs, r4, 4, "5sided"),
                                               ("box4", g4, r4, 4, "box"), ("box5", g5, r5, 5, "box")):
                    for _ in range(1000):
                        box = random_query(qkind, n, d, rng)
                        got = s.query(box)[0] if s is not fs else s.query(box.lo[0], box.hi[0], box.hi[1:])[0]
                        total += 1
                        dupes += len(got) - len(set(got))
                        bad += set(got) != oracle_report(pts, box)
    secs = time.perf_counter() - t0
    ok = bad == 0 and dupes == 0
    record(1, ok, f"{total} queries, {bad} wrong sets, {dupes} duplicates, {secs:.0f}s")
    assert ok


# 2 ---------------------------------------------------------------------------

def _covered(apexes, probes):
    if len(apexes) == 0:
        return np.zeros(len(probes), dtype=bool)
    return np.array([bool(np.any(np.all(apexes >= p, axis=1))) for p in probes])


def test_criterion_2_shallow_cutting_properties():
    rng = np.random.default_rng(2024)
    fails, over, disagree, probes_total = [], 0, 0, 0
    for j in range(50):
        n = int(rng.integers(16, 2049))
        if j % 5 == 4:
            # correlated set: a noisy diagonal
            base = rng.permutation(n)
            cols = [np.argsort(np.argsort(base + rng.integers(0, max(2, n // 20), n))) for _ in range(3)]
            pts = np.stack(cols, axis=1).astype(np.int64) + 1
        else:
            pts = perm_points(rng, n, 3)
        for t in (4, 16, 64):
            cs, cn = build_cutting_sweep(pts, t), build_cutting_naive(pts, t)
            for name, c in (("sweep", cs), ("naive", cn)):
                rep = verify_cutting(pts, t, c, c1=0.5, c2=10)
                if not rep.ok:
                    fails.append((j, n, t, name))
                if len(c) > cell_bound(n, t):
                    over += 1
            # the same probes judged against both cuttings
            pr = [np.column_stack([p, np.full(len(p), h)])
                  for h in sorted(set(rng.integers(1, n + 1, 8).tolist()) | {n})
                  for p in (uncovered_minimal_probes(np.vstack([cs.apexes, cn.apexes]), h, n),)]
            pr.append(rng.integers(1, n + 1, size=(200, 3)))
            probes = np.vstack(pr)
            probes_total += len(probes)
            disagree += int(np.count_nonzero(_covered(cs.apexes, probes) != _covered(cn.apexes, probes)))
    ok = not fails and over == 0 and disagree == 0
    record(2, ok, f"150 (set, t) pairs x 2 constructors: {len(fails)} verify failures, {over} over 4n/t+4, "
                  f"{disagree}/{probes_total} probe disagreements")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_criterion_3_sweep_cost():
    rng = np.random.default_rng(3)
    per_n = {}
    xs, ys = [], []
    for n in LADDER[:6]:
        cost_sum = x_sum = 0.0
        for _ in range(2):
            pts = perm_points(rng, n, 3)
            for t in (4, 16, 64):
                c = build_cutting_sweep(pts, t)
                x = len(c) * math.log2(n) ** 2
                cost = sweep_cost(c)
                cost_sum += cost
                x_sum += x
                xs.append(x)
                ys.append(cost)
        per_n[n] = cost_sum / x_sum
    xs, ys = np.array(xs), np.array(ys)
    c = float(xs @ ys / (xs @ xs))
    c_max = float(np.max(ys / xs))
    ok = all(0.5 * c <= v <= 1.5 * c for v in per_n.values())
    record(3, ok, f"fitted c={c:.4f}, per-size c " + " ".join(f"{v:.4f}" for v in per_n.values())
                  + f", max cost/(g lg^2 n)={c_max:.4f}")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_criterion_4_covering_exhaustive():
    s = plan_fanouts(512, 3)
    checked = bad_partition = too_big = mixed = prefix_big = 0
    for i in range(2, s.L):
        for key in all_keys(s, i):
            cov = node_cover(s, key)
            checked += 1
            lo, hi = key_leaves(s, key)
            spans = sorted(key_leaves(s, k) for k in cov)
            if spans[0][0] != lo or spans[-1][1] != hi or any(a[1] != b[0] for a, b in zip(spans, spans[1:])):
                bad_partition += 1
            too_big += len(cov) > 5
            mixed += sum(k.kind in ("prefix", "suffix", "full") for k in cov) < len(cov) - 1
            if key.l == 1:
                prefix_big += len(cov) > 3
    ok = checked > 0 and not (bad_partition or too_big or mixed or prefix_big)
    record(4, ok, f"{checked} covers at m=512: {bad_partition} non-partitions, {too_big} over 5, "
                  f"{mixed} with >1 bounded member, {prefix_big} prefix covers over 3")
    assert ok


# 5 ---------------------------------------------------------------------------

C_LAMBDA = 4


def test_criterion_5_gamma_lambda_union():
    n = 2048
    inst, _ = restricted_instance(512, n, seed=3)
    wrong = big_g = big_l = 0
    samples_g = nested_union_samples(inst, 1000, seed=11)
    samples_l = lambda_union_samples(inst, 1000, seed=12)
    for _, links, expected, union in samples_g:
        wrong += set(union) != expected or len(union) != len(set(union))
        big_g += len(links) > 5
    for _, links, expected, union in samples_l:
        wrong += set(union) != expected or len(union) != len(set(union))
        big_l += len(links) > C_LAMBDA * lglg(n)
    max_g = max(len(l) for _, l, _, _ in samples_g)
    max_l = max(len(l) for _, l, _, _ in samples_l)
    ok = wrong == 0 and big_g == 0 and big_l == 0
    record(5, ok, f"2000 samples: {wrong} union mismatches, max |Gamma|={max_g}, max |Lambda|={max_l} "
                  f"(bound {C_LAMBDA}*lglg n={C_LAMBDA * lglg(n):.1f})")
    assert ok


# 6, 7 ------------------------------------------------------------------------

def _executed_calls():
    """Every restricted call made by a mix of direct and top-level queries, with its point set."""
    out = []
    for delta in (2, 3):
        inst, pts = restricted_instance(512, 2048, seed=4, delta=delta)
        rng = np.random.default_rng(40 + delta)
        for _ in range(500):
            a1, b1 = sorted(rng.integers(1, 513, 2).tolist())
            q = tuple(int(v) for v in rng.integers(1, 2049, 3))
            st = QueryStats()
            inst.emptiness(a1, b1, q, st)
            inst.report(a1, b1, q, st)
            out.extend(st.calls)
    fs = FiveSidedStructure(fixture(4096, "clustered", 5, d=4).ranks)
    rng = np.random.default_rng(7)
    for _ in range(500):
        box = random_query("5sided", 4096, 4, rng)
        st = QueryStats()
        fs.is_empty(box.lo[0], box.hi[0], box.hi[1:], st)
        fs.query(box.lo[0], box.hi[0], box.hi[1:], None, st)
        out.extend(st.calls)
    return out


_CALLS = []


def calls():
    if not _CALLS:
        _CALLS.extend(_executed_calls())
    return _CALLS


def test_criterion_6_candidate_growth():
    bad_size = bad_iter = sized = 0
    for call in calls():
        sched = call["inst"].sched
        c0 = 2 * sched.tree(2).height
        for i, size in enumerate(call["sizes"], start=2):
            sized += 1
            bad_size += size > c0 * sched.beta ** (i + 1) - 1
        bad_iter += call["iterations"] > math.log(math.log2(max(call["n"], 4)), 3) + 2
    ok = bad_size == 0 and bad_iter == 0 and sized > 0
    record(6, ok, f"{len(calls())} calls, {sized} candidate sets: {bad_size} over c0*beta^(i+1)-1, "
                  f"{bad_iter} over log3 lg n + 2 iterations")
    assert ok


def test_criterion_7_early_stop():
    misses = bad = 0
    for call in calls():
        if not call["misses"] and not call["init_miss"]:
            continue
        c = call["inst"].slow.c
        box = QueryBox((call["a1"], -INF, -INF, -INF), (call["b1"],) + tuple(float(v) for v in call["q"]))
        cnt = oracle_count(c, box)
        for _, u in call["misses"]:
            misses += 1
            bad += cnt < 0.5 * u
        if call["init_miss"]:
            misses += 1
            bad += cnt < 0.5 * call["init_level"]
    ok = bad == 0 and misses > 0
    record(7, ok, f"{misses} early stops, {bad} not certified by the oracle count")
    assert ok


# 8 ---------------------------------------------------------------------------

EXACT_GENERAL_MAX = 2 ** 11


def test_criterion_8_size_trends():
    five, gen = [], []
    for n in LADDER:
        r = fixture(n, "uniform", 1, d=4).ranks
        five.append(FiveSidedStructure(r).total_entities() / (n * math.log2(n)))
        e = general_entities(r, n) if n <= EXACT_GENERAL_MAX else general_entities_estimate(r, n)
        gen.append(e / (n * math.log2(n) ** 4))
    band5, bandg = max(five) / min(five), max(gen) / min(gen)
    ok = band5 <= 2 and bandg <= 2
    record(8, ok, "5-sided /(n lg n) " + " ".join(f"{v:.2f}" for v in five) + f" band {band5:.2f}x; "
                  "general /(n lg^4 n) " + " ".join(f"{v:.3f}" for v in gen) + f" band {bandg:.2f}x")
    assert ok


# 9 ---------------------------------------------------------------------------

def test_criterion_9_query_cost_trend():
    ladder = LADDER[:6]
    rows, _ = run_bench(ladder, queries=300, structures=("5sided", "dominance4"), seed=9)
    r2 = {r["structure"]: r["fit_work_r2"] for r in rows}
    fa = [r["fa_per_iteration_max"] for r in rows if r["structure"] == "5sided"]
    env = fit_fa_envelope(ladder, fa)
    held = all(y <= env["a"] * math.log2(n) + env["b"] + 1e-9 for n, y in zip(ladder, fa))
    # diagnostic only: a line fitted on the four smallest sizes, checked on the two largest
    early = fit_fa_envelope(ladder[:4], fa[:4])
    extrap = all(y <= early["a"] * math.log2(n) + early["b"] for n, y in zip(ladder[4:], fa[4:]))
    ok = all(v >= 0.9 for v in r2.values()) and held and env["a"] > 0
    record(9, ok, "R^2 " + ", ".join(f"{k} {v:.3f}" for k, v in r2.items())
                  + f"; FIND-ANY per-iteration max {fa} <= {env['a']:.1f} lg n + {env['b']:.1f}"
                  + f" (line r2 {env['r2']:.2f}; extrapolation from 4 smallest sizes "
                  + ("holds" if extrap else "broken") + ")")
    assert ok


# 10 --------------------------------------------------------------------------

def test_criterion_10_verify_cli(tmp_path, capsys):
    codes = []
    for n in (2 ** 9, 2 ** 10, 2 ** 12):
        for dist in DISTRIBUTIONS:
            codes.append(main(["verify", "--n", str(n), "--distribution", dist, "--seed", "1",
                               "--queries", "100", "-o", str(tmp_path / "r.json")]))
    repro = tmp_path / "repro.json"
    fault = main(["verify", "--n", "1024", "--queries", "20", "--inject-fault", "drop-cell",
                  "--repro", str(repro), "-o", str(tmp_path / "f.json")])
    capsys.readouterr()
    import json
    rp = json.loads(repro.read_text()) if repro.exists() else {}
    minimized = bool(rp) and len(rp["points"]) < rp["original_points"]
    ok = all(c == 0 for c in codes) and fault == 1 and minimized
    record(10, ok, f"clean exit codes {codes}; fault exit {fault}, repro "
                   + (f"{len(rp['points'])} of {rp['original_points']} points" if rp else "missing"))
    assert ok
