"""Run sub-query plans over component CSV data and merge the partial results.

Cells are kept as strings except measure columns, which are parsed to
floats. An empty cell is NULL. Joins along snowflake hierarchies are inner
joins: fact rows whose foreign keys lead nowhere are dropped and counted in
``ResultTable.dropped_rows``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import kernels
from .errors import (
    CellTypeError,
    DuplicateKey,
    HeaderMismatch,
    MissingTable,
    ParseError,
    ShapeMismatch,
    Unanswerable,
    UnknownName,
)
from .integrator import FederationCatalog, Location
from .ontology import OntologyRepository
from .query_planner import FederatedQuery, LocalFilter, MergePlan, SubQueryPlan, plan
from .schema_model import ComponentSchema


@dataclass
class Table:
    name: str
    columns: dict[str, list]
    nrows: int
    key_column: str | None = None
    key_index: dict = field(default_factory=dict)


TableMap = dict[str, Table]


@dataclass
class ResultTable:
    columns: list[tuple[str, str]]
    rows: list[tuple]
    dropped_rows: int = field(default=0, compare=False)
    warnings: list[str] = field(default_factory=list, compare=False)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        for row in self.rows:
            writer.writerow(["" if v is None else format_number(v) if isinstance(v, (int, float)) else v for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        records = [dict(zip(self.names, row)) for row in self.rows]
        return json.dumps(records, indent=2, ensure_ascii=False) + "\n"


def format_number(v: float | int) -> str:
    if isinstance(v, float) and v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _sort_key(key: tuple) -> tuple:
    return tuple((0, "") if v is None else (1, v) for v in key)


# -- loading ------------------------------------------------------------------


def _parse_measure(table: str, row: int, column: str, cell: str) -> float | None:
    if cell == "":
        return None
    try:
        v = float(cell)
    except ValueError:
        raise CellTypeError(table, row, column, cell) from None
    if not math.isfinite(v):
        raise CellTypeError(table, row, column, cell)
    return v


def read_table(path: Path, name: str, expected: list[str], measures: Iterable[str] = ()) -> Table:
    """Read one CSV file and check its header against the descriptor.

    Raises:
        MissingTable, HeaderMismatch, CellTypeError, ParseError (ragged rows).
    """
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingTable(name).with_source(str(path)) from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise HeaderMismatch(name, expected, []).with_source(str(path))
    if len(set(header)) != len(header) or set(header) != set(expected):
        raise HeaderMismatch(name, expected, header).with_source(str(path))
    measures = set(measures)
    columns: dict[str, list] = {h: [] for h in header}
    cols = [columns[h] for h in header]
    nrows = 0
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != len(header):
            raise ParseError(f"{path}:{lineno}", f"expected {len(header)} fields, found {len(record)}")
        for h, col, cell in zip(header, cols, record):
            if h in measures:
                col.append(_parse_measure(name, lineno, h, cell))
            else:
                col.append(cell if cell != "" else None)
        nrows += 1
    return Table(name, columns, nrows)


def load_tables(component: ComponentSchema) -> TableMap:
    """Load every table of a component from ``<data_dir>/<table>.csv``.

    Dimension key columns are indexed; duplicated keys raise DuplicateKey.
    """
    if component.data_dir is None:
        raise MissingTable(component.fact.name)
    base = Path(component.data_dir)
    measures = [m.name for m in component.fact.measures]
    tables: TableMap = {}
    fact = component.fact
    tables[fact.name] = read_table(base / f"{fact.name}.csv", fact.name, fact.columns, measures)
    for dim in component.dimensions:
        t = read_table(base / f"{dim.name}.csv", dim.name, dim.attribute_names)
        pk = dim.primary_key
        if pk is not None:
            index, dup = kernels.build_index(t.columns[pk])
            if dup is not None:
                raise DuplicateKey(dim.name, dup).with_source(str(base / f"{dim.name}.csv"))
            t.key_column, t.key_index = pk, index
        tables[dim.name] = t
    return tables


# -- sub-query execution ------------------------------------------------------


def _to_number(v) -> float | None:
    if isinstance(v, (int, float)):
        return float(v)
    try:
        x = float(v)
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


_CMP: dict[str, Callable] = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _predicate(f: LocalFilter) -> Callable[[object], bool]:
    if isinstance(f.value, float):
        cmp, lit = _CMP[f.op], f.value

        def numeric(v) -> bool:
            x = None if v is None else _to_number(v)
            return x is not None and cmp(x, lit)

        return numeric
    if f.op == "=":
        allowed = set(f.values)
        return lambda v: v is not None and v in allowed
    if f.op == "!=":
        banned = set(f.values)
        return lambda v: v is not None and v not in banned
    cmp, lit = _CMP[f.op], f.value
    return lambda v: v is not None and cmp(str(v), lit)


def execute_subquery(sp: SubQueryPlan, tables: Mapping[str, Table]) -> ResultTable:
    """Run one component's share of a query.

    Fact rows are joined along ``sp.join_path``, filtered, grouped by the key
    columns and aggregated with the partial aggregations.
    """
    fact = tables[sp.fact_table]
    refs: dict[str, list[int]] = {sp.fact_table: list(range(fact.nrows))}
    for step in sp.join_path:
        parent = tables[step.parent_table]
        refs[step.parent_table] = kernels.probe(
            parent.key_index, tables[step.child_table].columns[step.fk_column], refs[step.child_table]
        )

    alive = list(range(fact.nrows))
    for step in sp.join_path:
        col = refs[step.parent_table]
        alive = [r for r in alive if col[r] >= 0]
    dropped = fact.nrows - len(alive)

    for f in sp.local_filters:
        pred = _predicate(f)
        rows = kernels.gather(refs[f.column.table], alive)
        values = kernels.gather(tables[f.column.table].columns[f.column.local_name], rows)
        alive = [r for r, v in zip(alive, values) if pred(v)]

    key_cols = []
    for col in sp.attribute_columns:
        rows = kernels.gather(refs[col.table], alive)
        key_cols.append(kernels.gather(tables[col.table].columns[col.local_name], rows))
    keys = list(zip(*key_cols)) if key_cols else [()] * len(alive)
    measure_cols = [kernels.gather(fact.columns[local], alive) for _, local, _ in sp.measure_columns]
    ops = [kernels.OPCODES[agg] for _, _, agg in sp.measure_columns]
    groups, acc = kernels.group_aggregate(keys, measure_cols, ops)

    rows_out = [tuple(g) + tuple(a) for g, a in zip(groups, acc)]
    if not sp.attribute_columns and not alive:
        count_only = bool(ops) and all(op == kernels.COUNT for op in ops)
        rows_out = [tuple(0 for _ in ops)] if count_only else []
    rows_out.sort(key=lambda r: _sort_key(r[: len(sp.key_names)]))
    columns = [(n, "key") for n in sp.key_names] + [(h, "measure") for h in sp.measure_headers]
    return ResultTable(columns, rows_out, dropped_rows=dropped)


# -- merging ------------------------------------------------------------------


def _combine(agg: str, cur, v):
    if v is None:
        return cur
    if cur is None:
        return v
    if agg in ("SUM", "COUNT"):
        return cur + v
    if agg == "MIN":
        return v if v < cur else cur
    return v if v > cur else cur


def merge_results(
    partials: list[tuple[str, ResultTable]], mp: MergePlan, repo: OntologyRepository | None = None
) -> ResultTable:
    """Recombine per-component partial results into the federated answer.

    Key values are mapped to their canonical spelling (when ``repo`` is
    given and the column is flagged), then rows are regrouped and each
    measure recombined. AVG is materialized here as total sum over total
    count; groups whose count is zero are dropped. Partials are folded in
    component-id order so the outcome does not depend on arrival order.

    Raises:
        ShapeMismatch: a partial's header differs from the merge plan.
    """
    nkeys = len(mp.key_columns)
    expected = mp.partial_columns
    slots: dict[tuple, list] = {}
    dropped = 0
    for cid, part in sorted(partials, key=lambda p: p[0]):
        if part.names != expected:
            raise ShapeMismatch(cid, expected, part.names)
        dropped += part.dropped_rows
        for row in part.rows:
            key = tuple(
                repo.canonical_value(v) if repo is not None and flag and isinstance(v, str) else v
                for v, flag in zip(row[:nkeys], mp.canonicalize)
            )
            acc = slots.get(key)
            if acc is None:
                slots[key] = list(row[nkeys:])
                continue
            for j, agg in enumerate(mp.partial_aggs):
                acc[j] = _combine(agg, acc[j], row[nkeys + j])

    out_rows = []
    for key, acc in slots.items():
        values = []
        keep = True
        for rule in mp.rules:
            if rule.agg == "AVG":
                total, count = acc[rule.inputs[0]], acc[rule.inputs[1]]
                if not count:
                    keep = False
                    break
                values.append(total / count)
            else:
                values.append(acc[rule.inputs[0]])
        if keep:
            out_rows.append(key + tuple(values))
    if not out_rows and nkeys == 0 and mp.count_only:
        out_rows = [tuple(0 for _ in mp.rules)]
    out_rows.sort(key=lambda r: _sort_key(r[:nkeys]))
    columns = [(k, "key") for k in mp.key_columns] + [(r.header, "measure") for r in mp.rules]
    return ResultTable(columns, out_rows, dropped_rows=dropped)


def load_all_tables(F: FederationCatalog) -> dict[str, TableMap]:
    return {c.component_id: load_tables(c) for c in F.components}


def execute_federated(
    q: FederatedQuery,
    F: FederationCatalog,
    repo: OntologyRepository | None,
    tables: Mapping[str, Mapping[str, Table]],
    workers: int = 1,
) -> ResultTable:
    """Plan, run every sub-plan, merge. ``workers > 1`` runs sub-plans on threads."""
    qp = plan(q, F, repo)

    def run(sp: SubQueryPlan) -> tuple[str, ResultTable]:
        return sp.component_id, execute_subquery(sp, tables[sp.component_id])

    if workers > 1 and len(qp.subplans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run, qp.subplans))
    else:
        partials = [run(sp) for sp in qp.subplans]
    result = merge_results(partials, qp.merge, repo)
    result.warnings = list(qp.warnings)
    return result


# -- brute-force oracle -------------------------------------------------------

_DANGLING = object()


def _oracle_paths(schema: ComponentSchema) -> dict[str, tuple[int, tuple[int, ...], list[tuple[str, str, str, str]]]]:
    """Every table's preferred path, by enumerating all simple paths."""
    dims = {d.name: d for d in schema.dimensions}

    def out_edges(table: str):
        links = schema.fact.dimension_links if table == schema.fact.name else dims[table].parents
        for ordinal, link in enumerate(links):
            yield ordinal, (table, link.fk, link.dimension, dims[link.dimension].primary_key)

    best: dict = {}

    def walk(table: str, visited: frozenset, rank: tuple, steps: list) -> None:
        cand = (len(steps), rank)
        if table not in best or cand < best[table][:2]:
            best[table] = (len(steps), rank, list(steps))
        for ordinal, edge in out_edges(table):
            if edge[2] in visited:
                continue
            steps.append(edge)
            walk(edge[2], visited | {edge[2]}, rank + (ordinal,), steps)
            steps.pop()

    walk(schema.fact.name, frozenset([schema.fact.name]), (), [])
    return best


def _oracle_lookup(table: Table, column: str, value) -> int | None:
    if value is None:
        return None
    hits = [i for i, v in enumerate(table.columns[column]) if v == value]
    return hits[0] if hits else None


def _oracle_matches(cond, value, repo: OntologyRepository | None) -> bool:
    if value is None:
        return False
    lit = cond.value
    if isinstance(lit, float):
        try:
            x = float(value)
        except ValueError:
            return False
        if not math.isfinite(x):
            return False
        a, b = x, lit
    elif cond.op in ("=", "!="):
        canon = repo.canonical_value if repo is not None else (lambda s: s)
        a, b = canon(value), canon(lit)
    else:
        a, b = value, lit
    return {
        "=": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
    }[cond.op]


def execute_global_oracle(
    q: FederatedQuery,
    F: FederationCatalog,
    repo: OntologyRepository | None,
    tables: Mapping[str, Mapping[str, Table]],
) -> ResultTable:
    """Answer ``q`` by scanning one denormalized union of all components.

    Independent of the planner and the kernels: names are resolved by
    linear scans, join paths by enumerating every simple path, parent rows
    by linear search, and aggregation by collecting value lists per group.
    """
    if not F.components:
        raise Unanswerable([])

    def named(name: str, element) -> bool:
        if element.fed_name.lower() == name.lower():
            return True
        return repo is not None and repo.concept_of(name).key == element.concept.key

    def measure_named(name: str):
        hits = [m for m in F.measures if named(name, m)]
        if not hits:
            raise UnknownName(name, "measure")
        return hits[0]

    def attribute_locations(name: str) -> tuple[str, list[Location]]:
        hits = [a for d in F.dimensions for a in d.attributes if named(name, a)]
        if not hits:
            raise UnknownName(name, "attribute")
        return hits[0].fed_name, [loc for a in hits for loc in a.locations]

    measures = [(measure_named(m.name), m.agg) for m in q.measures]
    key_info = [attribute_locations(n) for n in q.group_by]
    filter_info = [attribute_locations(c.name) for c in q.filters]

    rows: list[tuple[tuple, list]] = []  # (key tuple, measure values)
    dropped = 0
    warnings = []
    eligible = 0
    for schema in F.components:
        cid = schema.component_id
        paths = _oracle_paths(schema)
        comp_tables = tables[cid]

        def pick(locs: list[Location]):
            cands = []
            for loc in locs:
                if loc.component_id != cid or loc.table not in paths:
                    continue
                n, rank, steps = paths[loc.table]
                cands.append(((n, rank, schema.table_columns(loc.table).index(loc.local_name)), loc, steps))
            return min(cands, key=lambda c: c[0])[1:] if cands else None

        measure_cols = []
        for fm, _ in measures:
            local = [m.name for m in schema.fact.measures
                     if any(l.component_id == cid and l.local_name == m.name for l in fm.locations)]
            measure_cols.append(local[0] if local else None)
        key_cols = [pick(locs) for _, locs in key_info]
        filter_cols = [pick(locs) for _, locs in filter_info]
        if None in measure_cols or None in key_cols or None in filter_cols:
            warnings.append(f"{cid} excluded")
            continue
        eligible += 1

        fact = comp_tables[schema.fact.name]
        needed_steps = []
        for _, steps in key_cols + filter_cols:
            for s in steps:
                if s not in needed_steps:
                    needed_steps.append(s)

        for i in range(fact.nrows):
            row_of = {schema.fact.name: i}
            ok = True
            for child, fk, parent, key in needed_steps:
                fk_value = comp_tables[child].columns[fk][row_of[child]]
                hit = _oracle_lookup(comp_tables[parent], key, fk_value)
                if hit is None:
                    ok = False
                    break
                row_of[parent] = hit
            if not ok:
                dropped += 1
                continue

            def value(col):
                loc, _ = col
                return comp_tables[loc.table].columns[loc.local_name][row_of[loc.table]]

            if not all(_oracle_matches(c, value(col), repo) for c, col in zip(q.filters, filter_cols)):
                continue
            key = []
            for col in key_cols:
                v = value(col)
                if repo is not None and isinstance(v, str):
                    v = repo.canonical_value(v)
                key.append(v)
            rows.append((tuple(key), [fact.columns[local][i] for local in measure_cols]))

    if eligible == 0:
        raise Unanswerable([c.component_id for c in F.components])

    groups: dict[tuple, list[list]] = {}
    for key, vals in rows:
        groups.setdefault(key, [[] for _ in measures])
        for j, v in enumerate(vals):
            if v is not None:
                groups[key][j].append(v)

    out = []
    for key, value_lists in groups.items():
        cells = []
        keep = True
        for (fm, agg), vals in zip(measures, value_lists):
            if agg == "COUNT":
                cells.append(len(vals))
            elif agg == "AVG":
                if not vals:
                    keep = False
                    break
                total = 0.0
                for v in vals:
                    total += v
                cells.append(total / len(vals))
            elif not vals:
                cells.append(None)
            elif agg == "SUM":
                total = 0.0
                for v in vals:
                    total += v
                cells.append(total)
            elif agg == "MIN":
                cells.append(min(vals))
            else:
                cells.append(max(vals))
        if keep:
            out.append(key + tuple(cells))
    if not q.group_by and not out and measures and all(agg == "COUNT" for _, agg in measures):
        out = [tuple(0 for _ in measures)]
    out.sort(key=lambda r: tuple((0, "") if v is None else (1, v) for v in r[: len(q.group_by)]))
    columns = [(name, "key") for name, _ in key_info] + [
        (f"{agg}({fm.fed_name})", "measure") for fm, agg in measures
    ]
    return ResultTable(columns, out, dropped_rows=dropped, warnings=warnings)


def merge_in_every_order(
    partials: list[tuple[str, ResultTable]], mp: MergePlan, repo: OntologyRepository | None = None
) -> list[ResultTable]:
    """Merge results for each arrival order of the partials (testing aid)."""
    return [merge_results(list(p), mp, repo) for p in permutations(partials)]
