"""Federated query language and decomposition into per-component plans.

Grammar (keywords case-insensitive)::

    query       := SELECT select_list [WHERE cond (AND cond)*] [GROUP BY name ("," name)*]
    select_list := item ("," item)*
    item        := AGG "(" name ")" | name
    AGG         := SUM | COUNT | AVG | MIN | MAX
    cond        := name CMP literal          CMP in = != < <= > >=
    literal     := "double-quoted string" | decimal number

Names are federated names, compared case-insensitively; given an ontology,
any synonym of a federated name works too. A bare attribute name matches
every federated attribute of that name, in any federated dimension; each
component then reads it from the location closest to its fact table.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Union

from .errors import QuerySyntaxError, Unanswerable, UnknownName
from .integrator import FederatedAttribute, FederatedMeasure, FederationCatalog, Location
from .ontology import OntologyRepository
from .schema_model import ComponentSchema

AGGREGATES = ("SUM", "COUNT", "AVG", "MIN", "MAX")
COMPARATORS = ("=", "!=", "<", "<=", ">", ">=")
KEYWORDS = ("SELECT", "WHERE", "AND", "GROUP", "BY")

Literal = Union[str, float]


@dataclass(frozen=True)
class MeasureRef:
    agg: str
    name: str

    @property
    def header(self) -> str:
        return f"{self.agg}({self.name})"


@dataclass(frozen=True)
class Condition:
    name: str
    op: str
    value: Literal


@dataclass
class FederatedQuery:
    measures: list[MeasureRef] = field(default_factory=list)
    attributes: list[str] = field(default_factory=list)
    filters: list[Condition] = field(default_factory=list)
    group_by: list[str] = field(default_factory=list)

    def unparse(self) -> str:
        items = [m.header for m in self.measures] + list(self.attributes)
        text = "SELECT " + ", ".join(items)
        if self.filters:
            conds = []
            for c in self.filters:
                lit = _quote(c.value) if isinstance(c.value, str) else _number_text(c.value)
                conds.append(f"{c.name} {c.op} {lit}")
            text += " WHERE " + " AND ".join(conds)
        if self.group_by:
            text += " GROUP BY " + ", ".join(self.group_by)
        return text


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _number_text(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


# -- lexer / parser -----------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|!=|=|<|>)
  | (?P<punct>[(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _lex(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(pos, "a token", text[pos])
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: str) -> QuerySyntaxError:
        return QuerySyntaxError(self.tok.pos, expected, self.tok.text or "end of query")

    def is_kw(self, word: str) -> bool:
        return self.tok.kind == "name" and self.tok.text.upper() == word

    def keyword(self, word: str) -> None:
        if not self.is_kw(word):
            raise self.fail(word)
        self.i += 1

    def punct(self, ch: str) -> None:
        if self.tok.text != ch or self.tok.kind != "punct":
            raise self.fail(repr(ch))
        self.i += 1

    def name(self) -> _Tok:
        t = self.tok
        if t.kind != "name" or t.text.upper() in KEYWORDS:
            raise self.fail("a name")
        self.i += 1
        return t

    def literal(self) -> Literal:
        t = self.tok
        if t.kind == "number":
            self.i += 1
            return float(t.text)
        if t.kind == "string":
            self.i += 1
            return re.sub(r"\\(.)", r"\1", t.text[1:-1])
        raise self.fail("a literal")

    def parse(self) -> FederatedQuery:
        q = FederatedQuery()
        attr_pos: list[tuple[str, int]] = []
        self.keyword("SELECT")
        while True:
            t = self.tok
            nxt = self.toks[min(self.i + 1, len(self.toks) - 1)]
            if t.kind == "name" and t.text.upper() in AGGREGATES and nxt.text == "(":
                self.i += 2
                name = self.name().text
                self.punct(")")
                q.measures.append(MeasureRef(t.text.upper(), name))
            else:
                n = self.name()
                q.attributes.append(n.text)
                attr_pos.append((n.text, n.pos))
            if self.tok.text == "," and self.tok.kind == "punct":
                self.i += 1
                continue
            break
        if self.is_kw("WHERE"):
            self.i += 1
            while True:
                name = self.name().text
                if self.tok.kind != "op":
                    raise self.fail("a comparator")
                op = self.tok.text
                self.i += 1
                q.filters.append(Condition(name, op, self.literal()))
                if self.is_kw("AND"):
                    self.i += 1
                    continue
                break
        if self.is_kw("GROUP"):
            self.i += 1
            self.keyword("BY")
            q.group_by.append(self.name().text)
            while self.tok.text == "," and self.tok.kind == "punct":
                self.i += 1
                q.group_by.append(self.name().text)
        if self.tok.kind != "eof":
            raise self.fail("end of query")
        grouped = {g.casefold() for g in q.group_by}
        for name, pos in attr_pos:
            if name.casefold() not in grouped:
                raise QuerySyntaxError(pos, f"GROUP BY entry for {name}")
        return q


def parse_query(text: str) -> FederatedQuery:
    """Parse query text.

    Raises:
        QuerySyntaxError: with the 0-based character position of the
            offending token and what was expected there.
    """
    return _Parser(text).parse()


# -- plans --------------------------------------------------------------------


@dataclass(frozen=True)
class JoinStep:
    child_table: str
    fk_column: str
    parent_table: str
    key_column: str

    def __str__(self) -> str:
        return f"{self.child_table}.{self.fk_column} = {self.parent_table}.{self.key_column}"


@dataclass(frozen=True)
class ColumnRef:
    """A local column plus the join path that reaches its table from the fact."""

    table: str
    local_name: str
    join_path: tuple[JoinStep, ...]


@dataclass(frozen=True)
class LocalFilter:
    column: ColumnRef
    op: str
    value: Literal
    # for string equality tests: every spelling equivalent to the literal
    values: tuple[Literal, ...]


@dataclass
class SubQueryPlan:
    component_id: str
    fact_table: str
    measure_columns: list[tuple[str, str, str]]
    attribute_columns: list[ColumnRef]
    join_path: list[JoinStep]
    local_filters: list[LocalFilter]
    key_names: list[str]
    measure_headers: list[str]

    @property
    def columns(self) -> list[str]:
        return self.key_names + self.measure_headers


@dataclass(frozen=True)
class MergeRule:
    header: str
    agg: str
    inputs: tuple[int, ...]  # indices into the partial measure columns


@dataclass
class MergePlan:
    key_columns: list[str]
    canonicalize: list[bool]
    partial_aggs: list[str]
    partial_headers: list[str]
    rules: list[MergeRule]
    count_only: bool

    @property
    def partial_columns(self) -> list[str]:
        return self.key_columns + self.partial_headers

    @property
    def output_columns(self) -> list[str]:
        return self.key_columns + [r.header for r in self.rules]


@dataclass
class QueryPlan:
    subplans: list[SubQueryPlan]
    merge: MergePlan
    warnings: list[str]
    excluded: list[str]


def _names_element(name: str, element, repo: OntologyRepository | None) -> bool:
    if element.fed_name.casefold() == name.casefold():
        return True
    return repo is not None and repo.concept_of(name) == element.concept


def _resolve_measure(
    F: FederationCatalog, name: str, repo: OntologyRepository | None = None
) -> FederatedMeasure:
    for m in F.measures:
        if _names_element(name, m, repo):
            return m
    raise UnknownName(name, "measure")


def _resolve_attribute(
    F: FederationCatalog, name: str, repo: OntologyRepository | None = None
) -> list[FederatedAttribute]:
    found = [a for d in F.dimensions for a in d.attributes if _names_element(name, a, repo)]
    if not found:
        raise UnknownName(name, "attribute")
    return found


def reachable_tables(schema: ComponentSchema) -> dict[str, tuple[tuple[JoinStep, ...], tuple[int, ...]]]:
    """Shortest join path from the fact table to every reachable dimension.

    Breadth-first search expanding foreign keys in declaration order. Among
    equally short paths the first-discovered one wins, which is the path
    whose sequence of link ordinals is lexicographically smallest. Returns
    ``table -> (path, ordinals)``; the fact maps to empty tuples.
    """
    dims = {d.name: d for d in schema.dimensions}
    out: dict[str, tuple[tuple[JoinStep, ...], tuple[int, ...]]] = {schema.fact.name: ((), ())}
    queue = deque([schema.fact.name])
    while queue:
        table = queue.popleft()
        links = schema.fact.dimension_links if table == schema.fact.name else dims[table].parents
        path, rank = out[table]
        for ordinal, link in enumerate(links):
            if link.dimension in out:
                continue
            step = JoinStep(table, link.fk, link.dimension, dims[link.dimension].primary_key)
            out[link.dimension] = (path + (step,), rank + (ordinal,))
            queue.append(link.dimension)
    return out


def choose_attribute_location(
    schema: ComponentSchema, locations: list[Location], paths: dict | None = None
) -> ColumnRef | None:
    """Pick the location nearest to the fact table, or None if unreachable."""
    paths = paths if paths is not None else reachable_tables(schema)
    best = None
    for loc in locations:
        if loc.component_id != schema.component_id or loc.table not in paths:
            continue
        path, rank = paths[loc.table]
        order = schema.table_columns(loc.table).index(loc.local_name)
        key = (len(path), rank, order)
        if best is None or key < best[0]:
            best = (key, ColumnRef(loc.table, loc.local_name, path))
    return None if best is None else best[1]


def choose_measure_location(schema: ComponentSchema, measure: FederatedMeasure) -> str | None:
    names = {loc.local_name for loc in measure.locations if loc.component_id == schema.component_id}
    for m in schema.fact.measures:
        if m.name in names:
            return m.name
    return None


def _partial_aggs(agg: str) -> list[str]:
    return ["SUM", "COUNT"] if agg == "AVG" else [agg]


def plan(
    q: FederatedQuery, F: FederationCatalog, repo: OntologyRepository | None = None
) -> QueryPlan:
    """Decompose a federated query into one sub-plan per eligible component.

    A component is eligible when it has a location for every referenced
    measure and a reachable location for every referenced attribute.
    Ineligible components are reported in ``warnings``. AVG is always
    shipped as a SUM and a COUNT. With ``repo``, string equality filters
    are widened to every spelling of the literal's value class.

    Raises:
        UnknownName: a referenced name matches no federated element.
        Unanswerable: no component is eligible.
    """
    if not F.components:
        raise Unanswerable([])
    measures = [(_resolve_measure(F, m.name, repo), m.agg) for m in q.measures]
    key_attrs = [(name, _resolve_attribute(F, name, repo)) for name in q.group_by]
    filter_attrs = [(c, _resolve_attribute(F, c.name, repo)) for c in q.filters]

    key_names = [attrs[0].fed_name for _, attrs in key_attrs]
    partial_aggs: list[str] = []
    partial_headers: list[str] = []
    rules: list[MergeRule] = []
    for fm, agg in measures:
        idx = []
        for sub in _partial_aggs(agg):
            idx.append(len(partial_aggs))
            partial_aggs.append(sub)
            partial_headers.append(f"{sub}({fm.fed_name})")
        rules.append(MergeRule(f"{agg}({fm.fed_name})", agg, tuple(idx)))
    merge = MergePlan(
        key_columns=key_names,
        canonicalize=[True] * len(key_names),
        partial_aggs=partial_aggs,
        partial_headers=partial_headers,
        rules=rules,
        count_only=bool(rules) and all(r.agg == "COUNT" for r in rules),
    )

    subplans: list[SubQueryPlan] = []
    warnings: list[str] = []
    excluded: list[str] = []
    for schema in F.components:
        cid = schema.component_id
        paths = reachable_tables(schema)
        missing: list[str] = []
        measure_cols = []
        for (fm, agg), ref in zip(measures, q.measures):
            local = choose_measure_location(schema, fm)
            if local is None:
                missing.append(f"measure {ref.name}")
                continue
            for sub in _partial_aggs(agg):
                measure_cols.append((schema.fact.name, local, sub))

        def column_for(name: str, attrs: list[FederatedAttribute]) -> ColumnRef | None:
            locs = [loc for a in attrs for loc in a.locations]
            col = choose_attribute_location(schema, locs, paths)
            if col is None:
                missing.append(f"attribute {name}")
            return col

        key_cols = [column_for(name, attrs) for name, attrs in key_attrs]
        filters = []
        for cond, attrs in filter_attrs:
            col = column_for(cond.name, attrs)
            if col is None:
                continue
            values: tuple[Literal, ...] = (cond.value,)
            if repo is not None and isinstance(cond.value, str) and cond.op in ("=", "!="):
                values = repo.value_class(cond.value)
            filters.append(LocalFilter(col, cond.op, cond.value, values))

        if missing:
            excluded.append(cid)
            seen = list(dict.fromkeys(missing))
            warnings.append(f"{cid} excluded: no location for {', '.join(seen)}")
            continue

        join_path: list[JoinStep] = []
        for col in key_cols + [f.column for f in filters]:
            for step in col.join_path:
                if step not in join_path:
                    join_path.append(step)
        subplans.append(
            SubQueryPlan(
                component_id=cid,
                fact_table=schema.fact.name,
                measure_columns=measure_cols,
                attribute_columns=key_cols,
                join_path=join_path,
                local_filters=filters,
                key_names=list(key_names),
                measure_headers=list(partial_headers),
            )
        )
    if not subplans:
        raise Unanswerable(excluded)
    return QueryPlan(subplans, merge, warnings, excluded)


def explain(q: FederatedQuery, F: FederationCatalog, repo: OntologyRepository | None = None) -> str:
    """Render the plan for ``q`` as text without executing anything."""
    qp = plan(q, F, repo)
    lines = [f"query: {q.unparse()}"]
    for sp in qp.subplans:
        lines.append(f"component {sp.component_id} (fact {sp.fact_table})")
        for table, local, agg in sp.measure_columns:
            lines.append(f"  measure {agg}({table}.{local})")
        for name, col in zip(sp.key_names, sp.attribute_columns):
            lines.append(f"  key {name} <- {col.table}.{col.local_name}")
        for f in sp.local_filters:
            lit = " | ".join(_quote(v) if isinstance(v, str) else _number_text(v) for v in f.values)
            lines.append(f"  filter {f.column.table}.{f.column.local_name} {f.op} {lit}")
        if sp.join_path:
            lines.append("  join path:")
            for step in sp.join_path:
                lines.append(f"    {step}")
    for w in qp.warnings:
        lines.append(f"warning: {w}")
    m = qp.merge
    if m.key_columns:
        flags = [f"{k}{' (canonical values)' if c else ''}" for k, c in zip(m.key_columns, m.canonicalize)]
        lines.append("merge: group by " + ", ".join(flags))
    else:
        lines.append("merge: global aggregate")
    describe = {
        "SUM": "sum of partial sums",
        "COUNT": "sum of partial counts",
        "MIN": "min of partial mins",
        "MAX": "max of partial maxes",
        "AVG": "total sum / total count",
    }
    for r in m.rules:
        lines.append(f"  {r.header} = {describe[r.agg]}")
    return "\n".join(lines) + "\n"
