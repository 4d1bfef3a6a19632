"""Compare the compiled and pure-Python kernel backends.

Times the hash-join probe and the grouped aggregation on synthetic columns,
then a full federated query over generated CSVs.

    python benchmarks/bench_kernels.py --rows 200000 --repeat 5
"""

from __future__ import annotations

import argparse
import random
import sys
import tempfile
import time
from pathlib import Path

from fedwh import kernels
from fedwh.executor import execute_federated, load_all_tables
from fedwh.integrator import build_federation
from fedwh.ontology import build_repository
from fedwh.query_planner import parse_query
from fedwh.schema_model import parse_component


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def synthetic(rows: int, groups: int, seed: int):
    rng = random.Random(seed)
    pk = [str(i) for i in range(groups)]
    fks = [str(rng.randrange(groups + groups // 10)) for _ in range(rows)]
    values = [rng.randint(-400, 400) / 4 for _ in range(rows)]
    return pk, fks, values


def write_star(root: Path, rows: int, groups: int, seed: int):
    rng = random.Random(seed)
    doc = {
        "component_id": "B",
        "fact": {
            "name": "Sales",
            "measures": [{"name": "amount", "agg": "SUM"}],
            "links": [{"dimension": "Shop", "fk": "shop_id"}],
        },
        "dimensions": [{"name": "Shop", "attributes": [{"name": "shop_id", "key": True}, {"name": "region"}]}],
    }
    (root / "schema.json").write_text(__import__("json").dumps(doc))
    shops = ["shop_id,region"] + [f"{i},r{i % 50}" for i in range(groups)]
    (root / "Shop.csv").write_text("\n".join(shops) + "\n")
    sales = ["amount,shop_id"] + [f"{rng.randint(0, 400) / 4},{rng.randrange(groups)}" for _ in range(rows)]
    (root / "Sales.csv").write_text("\n".join(sales) + "\n")
    return parse_component((root / "schema.json").read_text(), root)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--groups", type=int, default=1_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if "compiled" not in kernels.BACKENDS:
        print("compiled backend not built; timing the python backend only", file=sys.stderr)

    pk, fks, values = synthetic(args.rows, args.groups, args.seed)
    all_rows = list(range(args.rows))
    with tempfile.TemporaryDirectory() as tmp:
        comp = write_star(Path(tmp), args.rows, args.groups, args.seed)
        F = build_federation([comp], build_repository([]))
        tables = load_all_tables(F)
        q = parse_query("SELECT SUM(amount), MAX(amount), COUNT(amount), region GROUP BY region")

        results = {}
        for name in sorted(kernels.BACKENDS):
            kernels.use_backend(name)
            mod = kernels.BACKENDS[name]
            index, _ = mod.build_index(pk)
            hits = mod.probe(index, fks, all_rows)
            live = [r for r in hits if r >= 0]
            keys = mod.gather(fks, all_rows)
            ops = [kernels.SUM, kernels.COUNT, kernels.MIN, kernels.MAX]
            cols = [values] * len(ops)
            results[name] = {
                "probe": best_of(lambda: mod.probe(index, fks, all_rows), args.repeat),
                "gather": best_of(lambda: mod.gather(values, live), args.repeat),
                "group_aggregate": best_of(lambda: mod.group_aggregate(keys, cols, ops), args.repeat),
                "query": best_of(lambda: execute_federated(q, F, None, tables), args.repeat),
            }

    names = sorted(results)
    print(f"rows={args.rows} groups={args.groups} repeat={args.repeat} (best time, ms)")
    print(f"{'kernel':<16}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for kernel in ("probe", "gather", "group_aggregate", "query"):
        cells = [results[n][kernel] for n in names]
        line = f"{kernel:<16}" + "".join(f"{c * 1000:>12.2f}" for c in cells)
        if len(names) == 2:
            line += f"{results['python'][kernel] / results['compiled'][kernel]:>11.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
