import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orthorange.geometry import ContractError, QueryBox
from orthorange.io.datasets import fixture, random_query
from orthorange.oracle import oracle_report
from orthorange.outer import (FiveSidedStructure, GeneralStructure, OuterConfig, build_5sided, build_general,
                              general_entities_estimate,
                              general_entities, query_5sided, query_dominance4, query_general, top_leaf_count)
from orthorange.restricted import QueryStats

from conftest import perm_points

INF = math.inf
_CACHE = {}


def five(n, dist="uniform", seed=1):
    key = ("5", n, dist, seed)
    if key not in _CACHE:
        ranks = fixture(n, dist, seed, d=4).ranks
        _CACHE[key] = (build_5sided(ranks), ranks)
    return _CACHE[key]


def test_flat_base_case():
    pts = perm_points(np.random.default_rng(0), 40, 4)
    s = build_5sided(pts)
    assert s.flat and s.restricted is None and s.depth() == 0
    got, st_ = query_5sided(s, QueryBox.five_sided(3, 30, 20, 20, 20))
    assert set(got) == oracle_report(pts, QueryBox.five_sided(3, 30, 20, 20, 20))
    assert st_.restricted_calls == 0


def test_structure_audit_4096():
    s, _ = five(4096)
    assert s.m == top_leaf_count(4096) and s.restricted.sched.m >= s.m
    sizes = np.diff(s.offsets)
    assert sizes.max() <= 2 * sizes.min()
    # bottoms partition the points by first coordinate, leaf indices match
    assert sum(b.n for b in s.bottoms) == s.n
    w = s.restricted.slow.c[:, 0]
    assert w.min() == 1 and w.max() == s.m
    for j, b in enumerate(s.bottoms):
        lo, hi = s.offsets[j], s.offsets[j + 1]
        assert np.array_equal(np.sort(b.ids), np.sort(s.ids[lo:hi]))


def test_whole_range_uses_restricted_only():
    s, ranks = five(4096)
    got, st_ = s.query(1, 4096, (4096, 4096, 4096))
    assert sorted(got) == list(range(4096))
    assert st_.restricted_calls == 1 and st_.recursion_depth == 0


def test_inside_one_leaf_recurses_only():
    s, ranks = five(4096)
    lo, hi = s.offsets[2] + 3, s.offsets[3] - 3
    a1, b1 = s.first[lo], s.first[hi - 1]
    st_ = QueryStats()
    got, st_ = s.query(a1, b1, (2000, 3000, 4000), None, st_)
    assert set(got) == oracle_report(ranks, QueryBox.five_sided(a1, b1, 2000, 3000, 4000))
    # the top restricted instance is skipped: every restricted call comes from deeper levels
    assert all(c["inst"] is not s.restricted for c in st_.calls)
    assert st_.recursion_depth >= 1


@pytest.mark.parametrize("dist", ["uniform", "clustered", "diagonal"])
def test_5sided_and_dominance_match_oracle(dist):
    s, ranks = five(2048, dist)
    rng = np.random.default_rng(3)
    for kind in ("5sided", "dom4"):
        for _ in range(200):
            box = random_query(kind, 2048, 4, rng)
            got, _ = query_5sided(s, box)
            assert len(got) == len(set(got)) and set(got) == oracle_report(ranks, box)
            if kind == "5sided":
                assert s.is_empty(box.lo[0], box.hi[0], box.hi[1:]) == (not got)


def test_dominance_trivial_and_depth():
    s, ranks = five(4096)
    assert sorted(query_dominance4(s, (4096,) * 4)[0]) == list(range(4096))
    assert query_dominance4(s, (0, 4096, 4096, 4096))[0] == []
    _, st_ = query_dominance4(s, (3000, 2000, 2500, 3500))
    lg = math.log2(4096)
    assert st_.recursion_depth <= math.log(lg, 1.5) + 2


def test_total_size_bounded():
    s, _ = five(4096)
    assert s.total_entities() / (4096 * 12) < 20


def test_lazy_equals_eager():
    ranks = fixture(2048, "uniform", 4, d=4).ranks
    lazy = FiveSidedStructure(ranks, lazy=True)
    eager = FiveSidedStructure(ranks)
    rng = np.random.default_rng(0)
    for _ in range(100):
        box = random_query("5sided", 2048, 4, rng)
        assert sorted(query_5sided(lazy, box)[0]) == sorted(query_5sided(eager, box)[0])
    assert lazy.materialize().total_entities() == eager.total_entities()


@given(st.integers(0, 2 ** 31 - 1))
def test_small_5sided_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(0, 400))
    pts = perm_points(rng, n, 4)
    s = FiveSidedStructure(pts, cfg=OuterConfig(cutoff_n0=16))
    for _ in range(10):
        box = random_query("5sided", max(n, 1), 4, rng)
        got, _ = query_5sided(s, box)
        assert len(got) == len(set(got)) and set(got) == oracle_report(pts, box)


def test_general_4d_matches_oracle_and_visits():
    ranks = fixture(2048, "clustered", 2, d=4).ranks
    g = build_general(ranks, 4)
    rng = np.random.default_rng(1)
    for _ in range(150):
        box = random_query("box", 2048, 4, rng)
        got, st_ = query_general(g, box)
        assert len(got) == len(set(got)) and set(got) == oracle_report(ranks, box)
        assert all(v <= 2 * math.log2(2048) for v in st_.lift_visits.values())


def test_general_unbounded_delegates_to_one_5sided():
    ranks = fixture(1024, "uniform", 2, d=4).ranks
    g = GeneralStructure(ranks)
    box = QueryBox((100, -INF, -INF, -INF), (900, 500, 600, 700))
    got, st_ = g.query(box)
    assert set(got) == oracle_report(ranks, box)
    assert st_.lifted_nodes == 0
    assert g.materialized() == 4   # one child per lifted dimension, all plain


def test_general_5d_and_visit_bound():
    ranks = fixture(4096, "uniform", 3, d=5).ranks
    g = build_general(ranks, 5)
    rng = np.random.default_rng(2)
    for _ in range(60):
        box = random_query("box", 4096, 5, rng)
        got, st_ = g.query(box)
        assert len(got) == len(set(got)) and set(got) == oracle_report(ranks, box)
        assert all(v <= 2 * math.log2(4096) for v in st_.lift_visits.values())


def test_general_rejects_low_dimension():
    with pytest.raises(ContractError):
        build_general(np.ones((3, 3)))
    with pytest.raises(ContractError):
        GeneralStructure(np.ones((3, 2)))
    g = GeneralStructure(perm_points(np.random.default_rng(0), 10, 4))
    with pytest.raises(ContractError):
        g.query(QueryBox((1,) * 5, (2,) * 5))


def test_general_entities_streams_full_structure():
    ranks = fixture(256, "uniform", 1, d=4).ranks
    cfg = OuterConfig(cutoff_n0=16)
    total = general_entities(ranks, 256, cfg)
    assert total > 256 * math.log2(256) ** 2


def test_general_entities_estimate_tracks_exact():
    ranks = fixture(512, "uniform", 1, d=4).ranks
    exact = general_entities(ranks, 512)
    est = general_entities_estimate(ranks, 512)
    assert abs(est / exact - 1) < 0.1


def test_is_empty_records_calls():
    s, _ = five(4096)
    st_ = QueryStats()
    s.is_empty(10, 4000, (3000, 3000, 3000), st_)
    assert st_.restricted_calls >= 1
