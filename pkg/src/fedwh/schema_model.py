"""Component warehouse descriptors.

A component lives in a directory holding ``schema.json`` plus one
``<table>.csv`` per table. The descriptor declares one fact table and any
number of dimension tables; snowflaked dimensions list their parent tables
together with the foreign-key attribute that reaches them::

    {
      "component_id": "DW2",
      "fact": {"name": "Reservation",
               "measures": [{"name": "cost", "agg": "SUM"}],
               "links": [{"dimension": "Customer", "fk": "customer_id"}]},
      "dimensions": [
        {"name": "Customer",
         "attributes": [{"name": "customer_id", "key": true},
                        {"name": "sub_category_id", "key": true}],
         "parents": [{"dimension": "sub_Category", "fk": "sub_category_id"}]},
        ...
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import DanglingParent, DuplicateName, ParentCycle, ParseError

AGGREGATIONS = ("SUM", "COUNT", "AVG", "MIN", "MAX")
DESCRIPTOR_NAME = "schema.json"


@dataclass(frozen=True)
class AttributeDescriptor:
    name: str
    is_key: bool = False


@dataclass(frozen=True)
class MeasureDescriptor:
    name: str
    default_aggregation: str = "SUM"


@dataclass(frozen=True)
class Link:
    """A foreign-key reference from a table to a dimension table."""

    dimension: str
    fk: str


@dataclass(frozen=True)
class DimensionDescriptor:
    name: str
    attributes: tuple[AttributeDescriptor, ...]
    parents: tuple[Link, ...] = ()

    @property
    def attribute_names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def primary_key(self) -> str | None:
        """First key attribute that is not a foreign key to a parent."""
        fks = {p.fk for p in self.parents}
        for attr in self.attributes:
            if attr.is_key and attr.name not in fks:
                return attr.name
        return None


@dataclass(frozen=True)
class FactDescriptor:
    name: str
    measures: tuple[MeasureDescriptor, ...]
    dimension_links: tuple[Link, ...] = ()

    @property
    def columns(self) -> list[str]:
        return [m.name for m in self.measures] + [link.fk for link in self.dimension_links]


@dataclass(frozen=True)
class ComponentSchema:
    component_id: str
    fact: FactDescriptor
    dimensions: tuple[DimensionDescriptor, ...]
    data_dir: Path | None = field(default=None, compare=False)

    def dimension(self, name: str) -> DimensionDescriptor:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        raise KeyError(name)

    def table_columns(self, table: str) -> list[str]:
        if table == self.fact.name:
            return self.fact.columns
        return self.dimension(table).attribute_names

    @property
    def tables(self) -> list[str]:
        return [self.fact.name] + [d.name for d in self.dimensions]


# -- parsing ------------------------------------------------------------------


def _expect(obj: Any, kind: type, location: str) -> Any:
    if not isinstance(obj, kind):
        raise ParseError(location, f"expected {kind.__name__}, got {type(obj).__name__}")
    return obj


def _field(obj: dict, key: str, kind: type, location: str, default: Any = ...) -> Any:
    if key not in obj:
        if default is ...:
            raise ParseError(location, f"missing field {key!r}")
        return default
    return _expect(obj[key], kind, f"{location}.{key}")


def _name(obj: dict, key: str, location: str) -> str:
    value = _field(obj, key, str, location).strip()
    if not value:
        raise ParseError(f"{location}.{key}", "name must be non-empty")
    return value


def _links(items: list, location: str) -> tuple[Link, ...]:
    links = []
    for i, item in enumerate(items):
        loc = f"{location}[{i}]"
        _expect(item, dict, loc)
        links.append(Link(_name(item, "dimension", loc), _name(item, "fk", loc)))
    return tuple(links)


def parse_component(text: str, data_dir: str | Path | None = None) -> ComponentSchema:
    """Parse and validate a ``schema.json`` document.

    Raises:
        ParseError: malformed JSON, missing or mistyped fields, unknown
            aggregation, a foreign key naming an undeclared column, or a
            referenced dimension without a primary key.
        DuplicateName: repeated table, attribute, measure or link.
        DanglingParent: a link names a dimension the component does not declare.
        ParentCycle: the dimension parent graph is cyclic.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    _expect(doc, dict, "$")

    component_id = _name(doc, "component_id", "$")

    fact_doc = _field(doc, "fact", dict, "$")
    measures = []
    for i, m in enumerate(_field(fact_doc, "measures", list, "$.fact")):
        loc = f"$.fact.measures[{i}]"
        _expect(m, dict, loc)
        agg = _field(m, "agg", str, loc, "SUM").upper()
        if agg not in AGGREGATIONS:
            raise ParseError(f"{loc}.agg", f"unknown aggregation {agg!r}")
        measures.append(MeasureDescriptor(_name(m, "name", loc), agg))
    fact = FactDescriptor(
        name=_name(fact_doc, "name", "$.fact"),
        measures=tuple(measures),
        dimension_links=_links(_field(fact_doc, "links", list, "$.fact", []), "$.fact.links"),
    )

    dimensions = []
    for i, d in enumerate(_field(doc, "dimensions", list, "$", [])):
        loc = f"$.dimensions[{i}]"
        _expect(d, dict, loc)
        attrs = []
        for j, a in enumerate(_field(d, "attributes", list, loc)):
            aloc = f"{loc}.attributes[{j}]"
            _expect(a, dict, aloc)
            attrs.append(AttributeDescriptor(_name(a, "name", aloc), _field(a, "key", bool, aloc, False)))
        dimensions.append(
            DimensionDescriptor(
                name=_name(d, "name", loc),
                attributes=tuple(attrs),
                parents=_links(_field(d, "parents", list, loc, []), f"{loc}.parents"),
            )
        )

    schema = ComponentSchema(
        component_id=component_id,
        fact=fact,
        dimensions=tuple(dimensions),
        data_dir=Path(data_dir) if data_dir is not None else None,
    )
    validate(schema)
    return schema


def _unique(names: list[str], scope: str) -> None:
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateName(scope, name)
        seen.add(name)


def validate(schema: ComponentSchema) -> None:
    _unique(schema.tables, f"component {schema.component_id}")
    _unique(schema.fact.columns, f"fact {schema.fact.name}")
    # a role-playing dimension (same dimension linked twice) is rejected
    _unique([link.dimension for link in schema.fact.dimension_links], f"links of {schema.fact.name}")

    dims = {d.name: d for d in schema.dimensions}
    referenced = set()
    for link in schema.fact.dimension_links:
        if link.dimension not in dims:
            raise DanglingParent(schema.fact.name, link.dimension)
        referenced.add(link.dimension)

    for dim in schema.dimensions:
        _unique(dim.attribute_names, f"dimension {dim.name}")
        _unique([p.dimension for p in dim.parents], f"parents of {dim.name}")
        names = set(dim.attribute_names)
        for p in dim.parents:
            if p.dimension not in dims:
                raise DanglingParent(dim.name, p.dimension)
            if p.fk not in names:
                raise ParseError(
                    f"dimension {dim.name}", f"parent foreign key {p.fk!r} is not an attribute"
                )
            referenced.add(p.dimension)

    _check_parent_cycles(schema)

    for name in sorted(referenced):
        if dims[name].primary_key is None:
            raise ParseError(
                f"dimension {name}", "referenced dimension declares no key attribute"
            )


def _check_parent_cycles(schema: ComponentSchema) -> None:
    graph = {d.name: [p.dimension for p in d.parents] for d in schema.dimensions}
    state: dict[str, int] = {}
    for start in graph:
        if state.get(start):
            continue
        # iterative DFS with an explicit path for cycle reporting
        path: list[str] = []
        stack = [(start, iter(graph[start]))]
        state[start] = 1
        path.append(start)
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                state[node] = 2
                continue
            if state.get(nxt) == 1:
                raise ParentCycle(path[path.index(nxt):])
            if not state.get(nxt):
                state[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(graph[nxt])))


def load_component(directory: str | Path) -> ComponentSchema:
    directory = Path(directory)
    path = directory / DESCRIPTOR_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(str(path), "descriptor file not found") from None
    try:
        return parse_component(text, data_dir=directory)
    except (ParseError, DanglingParent, ParentCycle, DuplicateName) as exc:
        raise exc.with_source(str(path))


# -- derived views ------------------------------------------------------------


def classify(schema: ComponentSchema) -> str:
    """``"star"`` when no dimension has parents, else ``"snowflake"``."""
    return "snowflake" if any(d.parents for d in schema.dimensions) else "star"


def topological_dimensions(schema: ComponentSchema) -> list[DimensionDescriptor]:
    """Dimensions ordered so that every ancestor precedes its descendants.

    Among dimensions whose parents are all placed, the earliest declared one
    goes next, so a star schema keeps declaration order.
    """
    remaining = list(schema.dimensions)
    placed: set[str] = set()
    ordered = []
    while remaining:
        for i, dim in enumerate(remaining):
            if all(p.dimension in placed for p in dim.parents):
                ordered.append(dim)
                placed.add(dim.name)
                del remaining[i]
                break
        else:  # pragma: no cover - parse_component rejects cycles
            raise ParentCycle([d.name for d in remaining])
    return ordered


def to_dict(schema: ComponentSchema) -> dict:
    return {
        "component_id": schema.component_id,
        "fact": {
            "name": schema.fact.name,
            "measures": [{"name": m.name, "agg": m.default_aggregation} for m in schema.fact.measures],
            "links": [{"dimension": l.dimension, "fk": l.fk} for l in schema.fact.dimension_links],
        },
        "dimensions": [
            {
                "name": d.name,
                "attributes": [{"name": a.name, "key": a.is_key} for a in d.attributes],
                "parents": [{"dimension": p.dimension, "fk": p.fk} for p in d.parents],
            }
            for d in schema.dimensions
        ],
    }


def serialize_component(schema: ComponentSchema) -> str:
    return json.dumps(to_dict(schema), indent=2) + "\n"


def from_dict(doc: dict, data_dir: str | Path | None = None) -> ComponentSchema:
    return parse_component(json.dumps(doc), data_dir=data_dir)
