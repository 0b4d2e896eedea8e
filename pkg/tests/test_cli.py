import csv
import io
import json

import pytest

from orthorange.bench import COLUMNS
from orthorange.io.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_build_query(tmp_path, capsys):
    pts, idx, qs, res = (tmp_path / x for x in ("p.tsv", "i.bin", "q.tsv", "r.jsonl"))
    assert run(["gen", "--n", 500, "--d", 4, "--seed", 4, "-o", pts], capsys)[0] == 0
    code, out, _ = run(["build", pts, "--structure", "5sided", "-o", idx], capsys)
    assert code == 0 and json.loads(out)["n"] == 500
    qs.write_text("dom4\t-inf\t+inf\t-inf\t+inf\t-inf\t+inf\t-inf\t+inf\n"
                  "5sided\t0\t1\t-inf\t1\t-inf\t1\t-inf\t1\n")
    assert run(["query", idx, qs, "-o", res], capsys)[0] == 0
    recs = [json.loads(line) for line in res.read_text().splitlines()]
    assert [r["query_index"] for r in recs] == [0, 1]
    assert recs[0]["ids"] == list(range(500)) and recs[1]["ids"] == []
    assert "work" in recs[0]["stats"]


def test_gen_is_deterministic_and_empty(tmp_path, capsys):
    a, b, e = tmp_path / "a", tmp_path / "b", tmp_path / "e"
    run(["gen", "--n", 64, "--distribution", "clustered", "-o", a], capsys)
    run(["gen", "--n", 64, "--distribution", "clustered", "-o", b], capsys)
    assert a.read_text() == b.read_text()
    run(["gen", "--n", 0, "-o", e], capsys)
    assert e.read_text() == "# dim=4 n=0\n"


def test_build_stats_deterministic(tmp_path, capsys):
    pts = tmp_path / "p.tsv"
    run(["gen", "--n", 700, "-o", pts], capsys)
    s1, s2 = tmp_path / "s1.json", tmp_path / "s2.json"
    run(["build", pts, "-o", tmp_path / "i1", "--stats", s1], capsys)
    run(["build", pts, "-o", tmp_path / "i2", "--stats", s2], capsys)
    assert s1.read_text() == s2.read_text()


def test_exit_codes(tmp_path, capsys):
    assert run(["nosuch"], capsys)[0] == 2
    assert run(["gen", "--n", -1, "-o", tmp_path / "x"], capsys)[0] == 2
    bad = tmp_path / "bad.tsv"
    bad.write_text("# dim=4 n=1\n0\t1\t2\n")
    code, _, err = run(["build", bad, "-o", tmp_path / "i"], capsys)
    assert code == 1 and "line 2" in err
    assert run(["query", tmp_path / "missing.bin", bad], capsys)[0] == 1
    assert run(["build", bad, "--beta", 1, "-o", tmp_path / "i"], capsys)[0] in (1, 2)
    assert run(["bench", "--ladder", "0"], capsys)[0] == 2


def test_construction_failure_exit_code(tmp_path, capsys, monkeypatch):
    import orthorange.index
    from orthorange.cutting import ConstructionError

    def boom(*a, **k):
        raise ConstructionError("no cell contains nested apex")

    pts = tmp_path / "p.tsv"
    run(["gen", "--n", 100, "-o", pts], capsys)
    monkeypatch.setattr(orthorange.index, "build_index", boom)
    code, _, err = run(["build", pts, "-o", tmp_path / "i"], capsys)
    assert code == 1 and "nested apex" in err


def test_env_override(tmp_path, capsys, monkeypatch):
    pts = tmp_path / "p.tsv"
    run(["gen", "--n", 300, "-o", pts], capsys)
    monkeypatch.setenv("ORTHORANGE_CUTOFF_N0", "1000")
    code, out, _ = run(["build", pts, "-o", tmp_path / "i"], capsys)
    assert code == 0 and json.loads(out)["restricted_instances"] == 0
    code, out, _ = run(["build", pts, "--cutoff-n0", 16, "-o", tmp_path / "i"], capsys)
    assert json.loads(out)["restricted_instances"] > 0
    monkeypatch.setenv("ORTHORANGE_BETA", "three")
    assert run(["build", pts, "-o", tmp_path / "i"], capsys)[0] == 2


def test_verify_clean_and_fault(tmp_path, capsys):
    code, out, err = run(["verify", "--n", 600, "--queries", 40], capsys)
    assert code == 0 and json.loads(out)["ok"] and err.strip().endswith("PASS")
    repro = tmp_path / "repro.json"
    code, out, err = run(["verify", "--n", 600, "--queries", 10, "--inject-fault", "drop-cell",
                          "--repro", repro], capsys)
    assert code == 1 and "FAIL" in err
    r = json.loads(repro.read_text())
    assert r["kind"] == "cutting" and len(r["points"]) < r["original_points"]


def test_bench_single_size(capsys):
    code, out, _ = run(["bench", "--ladder", "256", "--queries", 5], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1
    assert list(rows[0]) == COLUMNS and rows[0]["fit_work_a"] == ""


def test_bench_two_structures(capsys):
    code, out, _ = run(["bench", "--ladder", "256,512", "--queries", 5, "--structure", "5sided",
                        "--structure", "general"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["structure"] for r in rows] == ["5sided"] * 2 + ["general"] * 2
    assert rows[0]["fit_work_r2"] != ""
