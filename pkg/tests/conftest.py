import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")


def perm_points(rng, n, d):
    """Rank-space points: each column a permutation of 1..n."""
    if n == 0:
        return np.zeros((0, d), dtype=np.int64)
    return np.stack([rng.permutation(n) + 1 for _ in range(d)], axis=1).astype(np.int64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_INSTANCES = {}


def restricted_instance(m=512, n=4096, seed=0, **cfg):
    """Cached restricted instance with n points spread over m leaves."""
    from orthorange.restricted import EngineConfig, RestrictedStructure

    key = (m, n, seed, tuple(sorted(cfg.items())))
    if key not in _INSTANCES:
        rng = np.random.default_rng(seed)
        w = np.sort(rng.integers(1, m + 1, n))
        c = perm_points(rng, n, 3)
        _INSTANCES[key] = (RestrictedStructure(w, c, np.arange(n), m, n, EngineConfig(**cfg)),
                           np.column_stack([w, c]))
    return _INSTANCES[key]


def nested_union_samples(inst, count, seed=0):
    """(C, q', expected, union) over sampled nested cells C and q' inside C, following Gamma links."""
    store = inst.store
    rng = np.random.default_rng(seed)
    keys = [k for k in store.gamma]
    out = []
    while len(out) < count:
        key = keys[int(rng.integers(len(keys)))]
        rc = store.ranges[key]
        ci = int(rng.integers(len(rc.nested)))
        nc = rc.nested[ci]
        nj = int(rng.integers(len(nc)))
        apex = nc.apexes[nj]
        q = np.array([int(rng.integers(1, a + 1)) for a in apex])
        lo, hi = store.key_slice(key)
        pts, ids = store.coords[lo:hi], store.ids[lo:hi]
        inside = np.all(pts <= apex, axis=1) & np.all(pts <= q, axis=1)
        expected = set(ids[inside].tolist())
        union = []
        links = store.gamma[key][ci][nj]
        for ck, j in links:
            cut = store.ranges[ck].cut
            conf = cut.conflict_index(j)
            sel = np.all(cut.coords[conf] <= q, axis=1)
            union.extend(cut.ids[conf][sel].tolist())
        out.append((key, links, expected, union))
    return out


def lambda_union_samples(inst, count, seed=0):
    """Same union check for T_delta cells and their Lambda links into the log^6 layer."""
    store = inst.store
    rng = np.random.default_rng(seed)
    keys = list(store.lam)
    out = []
    while len(out) < count:
        key = keys[int(rng.integers(len(keys)))]
        rc = store.ranges[key]
        ci = int(rng.integers(len(rc.cut)))
        apex = rc.cut.apexes[ci]
        q = np.array([int(rng.integers(1, a + 1)) for a in apex])
        lo, hi = store.key_slice(key)
        pts, ids = store.coords[lo:hi], store.ids[lo:hi]
        expected = set(ids[np.all(pts <= np.minimum(apex, q), axis=1)].tolist())
        union = []
        links = store.lam[key][ci]
        for node, j in links:
            got = store.log6[node].dom[j].query(q)
            union.extend(got)
        out.append((key, links, expected, union))
    return out


ACCEPTANCE = {}


def record(number: int, ok: bool, detail: str):
    """Log an acceptance verdict; the terminal summary prints one line per criterion."""
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
