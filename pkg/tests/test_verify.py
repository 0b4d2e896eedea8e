import numpy as np
from hypothesis import given, strategies as st

from orthorange.io.datasets import fixture
from orthorange.outer import OuterConfig
from orthorange.verify import ddmin, verify_points


@given(st.sets(st.integers(0, 200), min_size=1, max_size=4), st.integers(5, 300))
def test_ddmin_finds_required_subset(needed, extra):
    items = sorted(set(range(extra)) | needed)
    out = ddmin(items, lambda sub: needed <= set(sub))
    assert set(out) == needed


def test_ddmin_single_culprit_anywhere():
    for bad in (0, 17, 99):
        assert ddmin(list(range(100)), lambda s: bad in s) == [bad]


def test_verify_clean():
    rep = verify_points(fixture(1024, "clustered", 2, d=5).ranks, queries=40)
    assert rep.ok, rep.failures[:3]
    for key in ("query_dom4", "query_5sided", "query_box4", "query_box", "emptiness", "cutting",
                "candidate_growth", "iteration_count", "partition"):
        assert rep.checks[key] > 0, key
    # m = 8 at this size: two trees only, so there are no gamma links to audit
    assert rep.checks["gamma_size"] == 0


def test_verify_fault_is_caught_and_minimized():
    rep = verify_points(fixture(1024, "uniform", 1, d=4).ranks, queries=5,
                        cfg=OuterConfig(fault="drop-cell"))
    assert not rep.ok and any(f["kind"] == "cutting" for f in rep.failures)
    r = rep.repro
    assert r["kind"] == "cutting" and len(r["points"]) <= 40
    assert r["violation"]


def test_verify_rejects_low_dimension():
    rep = verify_points(np.ones((5, 3), dtype=np.int64))
    assert not rep.ok and rep.failures[0]["kind"] == "dimension"
