"""orthorange command line: gen, build, query, verify, bench.

Exit codes: 0 success, 1 data or verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys

import numpy as np

from .. import __version__
from ..cutting import ConstructionError
from ..geometry import ContractError, to_rank_space
from ..outer import OuterConfig
from .datasets import DISTRIBUTIONS, generate_points
from .formats import DataError, load_index, read_points, read_queries, save_index, write_points, write_results

ENV_PREFIX = "ORTHORANGE_"

# flag -> (type, default); env ORTHORANGE_<FLAG> overrides the default, the flag overrides both
SHARED = {
    "beta": (int, 3),
    "nested_c": (int, 16),
    "cutoff_n0": (int, 64),
    "c1": (float, 0.5),
    "c2": (float, 10.0),
    "constructor": (str, "sweep"),
    "seed": (int, 0),
}


class UsageError(Exception):
    pass


def _env_default(name, typ, default):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return default
    try:
        return typ(raw)
    except ValueError:
        raise UsageError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a valid {typ.__name__}") from None


def _shared(p: argparse.ArgumentParser):
    g = p.add_argument_group("structure parameters")
    for name, (typ, default) in SHARED.items():
        flag = "--" + name.replace("_", "-")
        kw = {"type": typ, "default": _env_default(name, typ, default)}
        if name == "constructor":
            kw["choices"] = ("sweep", "naive")
        g.add_argument(flag, **kw)


def _config(a, fault=None) -> OuterConfig:
    if a.beta < 2:
        raise UsageError("--beta must be >= 2")
    if a.nested_c < 1 or a.cutoff_n0 < 1:
        raise UsageError("--nested-c and --cutoff-n0 must be positive")
    if a.constructor not in ("sweep", "naive"):
        raise UsageError(f"unknown constructor {a.constructor!r}")
    return OuterConfig(beta=a.beta, nested_c=a.nested_c, cutoff_n0=a.cutoff_n0, constructor=a.constructor,
                       fault=fault)


def _out(path):
    # stdout must survive the with-block
    return open(path, "w") if path and path != "-" else contextlib.nullcontext(sys.stdout)


def cmd_gen(a):
    if a.n < 0 or a.d < 1:
        raise UsageError("need n >= 0 and d >= 1")
    pts = generate_points(a.n, a.d, a.distribution, a.seed)
    write_points(a.output, pts)
    return 0


def cmd_build(a):
    from ..index import build_index

    pf = read_points(a.points)
    idx = build_index(pf, a.structure, _config(a), a.d)
    save_index(a.output, idx)
    with _out(a.stats) as fh:
        json.dump(idx.build_stats, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return 0


def cmd_query(a):
    from ..index import answer

    idx = load_index(a.index)
    specs = read_queries(a.queries, idx.dim)
    recs = []
    for i, spec in enumerate(specs):
        ids, st = answer(idx, spec)
        recs.append({"query_index": i, "ids": ids, "stats": st.to_json()})
    with _out(a.output) as fh:
        write_results(fh, recs)
    return 0


def cmd_verify(a):
    from ..verify import verify_points

    if a.points:
        pf = read_points(a.points)
        ranks = to_rank_space(pf.coords, dim=pf.dim).ranks.reshape(len(pf.ids), pf.dim)
    else:
        ranks = to_rank_space(generate_points(a.n, a.d, a.distribution, a.seed)).ranks
    rep = verify_points(ranks, queries=a.queries, seed=a.seed, cfg=_config(a, a.inject_fault),
                        c1=a.c1, c2=a.c2)
    report = rep.to_json()
    if not rep.ok and rep.repro is not None:
        with open(a.repro, "w") as fh:
            json.dump(rep.repro, fh, indent=1)
        report["repro_file"] = a.repro
    report.pop("repro", None)
    with _out(a.output) as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    for k, v in sorted(rep.checks.items()):
        print(f"{k:>18}: {v}", file=sys.stderr)
    print("PASS" if rep.ok else f"FAIL ({len(rep.failures)} violations)", file=sys.stderr)
    return 0 if rep.ok else 1


def cmd_bench(a):
    from ..bench import run_bench, write_csv

    ladder = [int(x) for x in a.ladder.split(",") if x]
    if not ladder or min(ladder) < 1:
        raise UsageError("--ladder needs positive sizes, e.g. 512,1024,2048")
    rows, _ = run_bench(ladder, a.repetitions, tuple(a.structure), a.queries, a.seed, _config(a))
    with _out(a.output) as fh:
        write_csv(fh, rows)
    return 0


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orthorange", description="4D orthogonal range reporting toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a points file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=4)
    g.add_argument("--distribution", choices=DISTRIBUTIONS, default="uniform")
    g.add_argument("-o", "--output", required=True)
    _shared(g)
    g.set_defaults(fn=cmd_gen)

    b = sub.add_parser("build", help="build an index file")
    b.add_argument("points")
    b.add_argument("--structure", choices=("5sided", "dominance4", "general"), default="5sided")
    b.add_argument("--d", type=int, default=None, help="expected dimension (checked against the file)")
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--stats", default="-", help="build-stats JSON path (default stdout)")
    _shared(b)
    b.set_defaults(fn=cmd_build)

    q = sub.add_parser("query", help="answer a queries file against an index")
    q.add_argument("index")
    q.add_argument("queries")
    q.add_argument("-o", "--output", default="-")
    q.set_defaults(fn=cmd_query)

    v = sub.add_parser("verify", help="check structures against the brute-force oracle")
    v.add_argument("points", nargs="?", help="points file (default: generate a fixture)")
    v.add_argument("--n", type=int, default=1024)
    v.add_argument("--d", type=int, default=5)
    v.add_argument("--distribution", choices=DISTRIBUTIONS, default="uniform")
    v.add_argument("--queries", type=int, default=200, help="random queries per type")
    v.add_argument("--inject-fault", choices=("drop-cell",), default=None)
    v.add_argument("--repro", default="repro.json", help="where to write the minimized reproduction")
    v.add_argument("-o", "--output", default="-")
    _shared(v)
    v.set_defaults(fn=cmd_verify)

    be = sub.add_parser("bench", help="size ladder benchmark to CSV")
    be.add_argument("--ladder", default="512,1024,2048,4096")
    be.add_argument("--repetitions", type=int, default=1)
    be.add_argument("--queries", type=int, default=200)
    be.add_argument("--structure", action="append", choices=("5sided", "dominance4", "general"))
    be.add_argument("-o", "--output", default="-")
    _shared(be)
    be.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    try:
        a = parser().parse_args(argv)
    except UsageError as exc:
        print(f"orthorange: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(a, "structure", None) is None and a.cmd == "bench":
        a.structure = ["5sided"]
    try:
        return a.fn(a)
    except UsageError as exc:
        print(f"orthorange: {exc}", file=sys.stderr)
        return 2
    except (DataError, ContractError, ConstructionError) as exc:
        print(f"orthorange: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
