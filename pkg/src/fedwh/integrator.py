"""Fold component schemas into one federated logical schema.

Every federated measure and attribute keeps an inventory of the physical
places it comes from, as ``Location(component_id, table, local_name)``
entries. Matching is by ontology concept: an incoming element joins the
federated element whose concept equals its own, otherwise it becomes a new
element. Dimensions are processed ancestors-first so parent levels of a
snowflake are in the catalog before the tables that reference them.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import AggregationConflict, CatalogMismatch, DuplicateName, HierarchyConflict
from .ontology import ConceptId, OntologyRepository
from .schema_model import (
    ComponentSchema,
    DimensionDescriptor,
    from_dict as schema_from_dict,
    to_dict as schema_to_dict,
    topological_dimensions,
)


@dataclass(frozen=True, order=True)
class Location:
    component_id: str
    table: str
    local_name: str

    def __str__(self) -> str:
        return f"{self.component_id}.{self.table}.{self.local_name}"

    def to_list(self) -> list[str]:
        return [self.component_id, self.table, self.local_name]


@dataclass
class FederatedAttribute:
    fed_name: str
    concept: ConceptId
    locations: list[Location] = field(default_factory=list)
    is_key: bool = False
    ontology_backed: bool = False


@dataclass
class FederatedMeasure:
    fed_name: str
    concept: ConceptId
    aggregation: str
    locations: list[Location] = field(default_factory=list)
    ontology_backed: bool = False


@dataclass
class FederatedDimension:
    fed_name: str
    concept: ConceptId
    attributes: list[FederatedAttribute] = field(default_factory=list)
    source_tables: list[tuple[str, str]] = field(default_factory=list)
    ontology_backed: bool = False

    def attribute_for(self, concept: ConceptId) -> FederatedAttribute | None:
        for attr in self.attributes:
            if attr.concept == concept:
                return attr
        return None


@dataclass(frozen=True)
class HierarchyEdge:
    """Parent link between federated dimensions, witnessed by one component.

    ``fk`` is the child table's foreign-key column and ``key`` the parent
    table's key column it references.
    """

    child: ConceptId
    parent: ConceptId
    fk: Location
    key: Location
    ontology_confirmed: bool = False


@dataclass
class FederationCatalog:
    fact_name: str | None = None
    fact_tables: list[tuple[str, str]] = field(default_factory=list)
    measures: list[FederatedMeasure] = field(default_factory=list)
    dimensions: list[FederatedDimension] = field(default_factory=list)
    hierarchy_edges: list[HierarchyEdge] = field(default_factory=list)
    components: list[ComponentSchema] = field(default_factory=list)
    build_log: list[dict] = field(default_factory=list)

    def copy(self) -> "FederationCatalog":
        return FederationCatalog(
            fact_name=self.fact_name,
            fact_tables=list(self.fact_tables),
            measures=[
                FederatedMeasure(m.fed_name, m.concept, m.aggregation, list(m.locations), m.ontology_backed)
                for m in self.measures
            ],
            dimensions=[
                FederatedDimension(
                    d.fed_name,
                    d.concept,
                    [
                        FederatedAttribute(a.fed_name, a.concept, list(a.locations), a.is_key, a.ontology_backed)
                        for a in d.attributes
                    ],
                    list(d.source_tables),
                    d.ontology_backed,
                )
                for d in self.dimensions
            ],
            hierarchy_edges=list(self.hierarchy_edges),
            components=list(self.components),
            build_log=list(self.build_log),
        )

    def component(self, component_id: str) -> ComponentSchema:
        for comp in self.components:
            if comp.component_id == component_id:
                return comp
        raise KeyError(component_id)

    def measure_for(self, concept: ConceptId) -> FederatedMeasure | None:
        for m in self.measures:
            if m.concept == concept:
                return m
        return None

    def dimension_for(self, concept: ConceptId) -> FederatedDimension | None:
        for d in self.dimensions:
            if d.concept == concept:
                return d
        return None

    def all_locations(self) -> list[Location]:
        locs = [loc for m in self.measures for loc in m.locations]
        locs += [loc for d in self.dimensions for a in d.attributes for loc in a.locations]
        return locs

    def _log(self, component_id: str, element: str, action: str, local: str, federated: str) -> None:
        self.build_log.append(
            {
                "component": component_id,
                "element": element,
                "action": action,
                "local": local,
                "federated": federated,
            }
        )

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        def concept(c: ConceptId) -> dict:
            return {"key": c.key, "label": c.label}

        def locs(items: Iterable[Location]) -> list[list[str]]:
            return [loc.to_list() for loc in sorted(items)]

        return {
            "fact": {"name": self.fact_name, "tables": [list(t) for t in self.fact_tables]},
            "measures": [
                {
                    "name": m.fed_name,
                    "concept": concept(m.concept),
                    "aggregation": m.aggregation,
                    "locations": locs(m.locations),
                    "ontology_backed": m.ontology_backed,
                }
                for m in self.measures
            ],
            "dimensions": [
                {
                    "name": d.fed_name,
                    "concept": concept(d.concept),
                    "source_tables": [list(t) for t in d.source_tables],
                    "ontology_backed": d.ontology_backed,
                    "attributes": [
                        {
                            "name": a.fed_name,
                            "concept": concept(a.concept),
                            "key": a.is_key,
                            "locations": locs(a.locations),
                            "ontology_backed": a.ontology_backed,
                        }
                        for a in d.attributes
                    ],
                }
                for d in self.dimensions
            ],
            "hierarchy_edges": [
                {
                    "child": concept(e.child),
                    "parent": concept(e.parent),
                    "fk": e.fk.to_list(),
                    "key": e.key.to_list(),
                    "ontology_confirmed": e.ontology_confirmed,
                }
                for e in self.hierarchy_edges
            ],
            "components": [schema_to_dict(c) for c in self.components],
            "build_log": list(self.build_log),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "FederationCatalog":
        def concept(d: dict) -> ConceptId:
            return ConceptId(d["key"], d["label"])

        def loc(items: list[str]) -> Location:
            return Location(*items)

        return cls(
            fact_name=doc["fact"]["name"],
            fact_tables=[tuple(t) for t in doc["fact"]["tables"]],
            measures=[
                FederatedMeasure(
                    m["name"], concept(m["concept"]), m["aggregation"],
                    [loc(x) for x in m["locations"]], m.get("ontology_backed", False),
                )
                for m in doc["measures"]
            ],
            dimensions=[
                FederatedDimension(
                    d["name"],
                    concept(d["concept"]),
                    [
                        FederatedAttribute(
                            a["name"], concept(a["concept"]), [loc(x) for x in a["locations"]],
                            a.get("key", False), a.get("ontology_backed", False),
                        )
                        for a in d["attributes"]
                    ],
                    [tuple(t) for t in d["source_tables"]],
                    d.get("ontology_backed", False),
                )
                for d in doc["dimensions"]
            ],
            hierarchy_edges=[
                HierarchyEdge(
                    concept(e["child"]), concept(e["parent"]), loc(e["fk"]), loc(e["key"]),
                    e.get("ontology_confirmed", False),
                )
                for e in doc["hierarchy_edges"]
            ],
            components=[schema_from_dict(c) for c in doc["components"]],
            build_log=list(doc.get("build_log", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "FederationCatalog":
        return cls.from_dict(json.loads(text))

    def attach_components(self, components: Iterable[ComponentSchema]) -> None:
        """Replace embedded descriptors with loaded ones that carry data dirs.

        Raises:
            CatalogMismatch: the configured components differ from those the
                catalog was built from.
        """
        by_id = {c.component_id: c for c in components}
        ours = [c.component_id for c in self.components]
        if sorted(by_id) != sorted(ours):
            raise CatalogMismatch(
                f"catalog built from components {ours}, configuration lists {sorted(by_id)}"
            )
        for i, comp in enumerate(self.components):
            fresh = by_id[comp.component_id]
            if schema_to_dict(fresh) != schema_to_dict(comp):
                raise CatalogMismatch(
                    f"descriptor of {comp.component_id} changed since the catalog was built"
                )
            self.components[i] = fresh


def _fed_label(repo: OntologyRepository, local_name: str) -> str:
    return repo.label_of(local_name) or local_name


def declared_locations(schema: ComponentSchema) -> list[Location]:
    """Every measure and dimension attribute a component declares."""
    cid = schema.component_id
    locs = [Location(cid, schema.fact.name, m.name) for m in schema.fact.measures]
    for dim in schema.dimensions:
        locs += [Location(cid, dim.name, a.name) for a in dim.attributes]
    return locs


def integrate_measures(
    F: FederationCatalog, H: ComponentSchema, repo: OntologyRepository
) -> FederationCatalog:
    """Map each fact measure of ``H`` onto a federated measure, in place.

    Raises:
        AggregationConflict: the matched federated measure has a different
            default aggregation.
    """
    cid = H.component_id
    if F.fact_name is None:
        F.fact_name = _fed_label(repo, H.fact.name)
        F._log(cid, "fact", "created", H.fact.name, F.fact_name)
    else:
        F._log(cid, "fact", "merged", H.fact.name, F.fact_name)
    F.fact_tables.append((cid, H.fact.name))

    for b in H.fact.measures:
        concept = repo.concept_of(b.name)
        loc = Location(cid, H.fact.name, b.name)
        known = repo.knows(b.name)
        m = F.measure_for(concept)
        if m is None:
            m = FederatedMeasure(_fed_label(repo, b.name), concept, b.default_aggregation, [loc], known)
            F.measures.append(m)
            F._log(cid, "measure", "created", f"{H.fact.name}.{b.name}", m.fed_name)
            continue
        if m.aggregation != b.default_aggregation:
            raise AggregationConflict(m.fed_name, m.aggregation, b.default_aggregation)
        m.locations.append(loc)
        m.ontology_backed = m.ontology_backed or known
        F._log(cid, "measure", "merged", f"{H.fact.name}.{b.name}", m.fed_name)
    return F


def integrate_dimension_into(
    F: FederationCatalog, D: DimensionDescriptor, component_id: str, repo: OntologyRepository
) -> FederationCatalog:
    """Merge one dimension table into the similar federated dimension, in place.

    Without a similar dimension a new one is created with one location per
    attribute.
    """
    concept = repo.concept_of(D.name)
    target = F.dimension_for(concept)
    if target is None:
        target = FederatedDimension(_fed_label(repo, D.name), concept, ontology_backed=repo.knows(D.name))
        F.dimensions.append(target)
        F._log(component_id, "dimension", "created", D.name, target.fed_name)
    else:
        target.ontology_backed = target.ontology_backed or repo.knows(D.name)
        F._log(component_id, "dimension", "merged", D.name, target.fed_name)
    target.source_tables.append((component_id, D.name))

    for attr in D.attributes:
        a_concept = repo.concept_of(attr.name)
        loc = Location(component_id, D.name, attr.name)
        known = repo.knows(attr.name)
        fa = target.attribute_for(a_concept)
        local = f"{D.name}.{attr.name}"
        if fa is None:
            fa = FederatedAttribute(_fed_label(repo, attr.name), a_concept, [loc], attr.is_key, known)
            target.attributes.append(fa)
            F._log(component_id, "attribute", "created", local, f"{target.fed_name}.{fa.fed_name}")
        else:
            fa.locations.append(loc)
            fa.is_key = fa.is_key or attr.is_key
            fa.ontology_backed = fa.ontology_backed or known
            F._log(component_id, "attribute", "merged", local, f"{target.fed_name}.{fa.fed_name}")
    return F


def _reaches(edges: list[HierarchyEdge], start: ConceptId, goal: ConceptId) -> bool:
    graph: dict[ConceptId, set[ConceptId]] = defaultdict(set)
    for e in edges:
        graph[e.child].add(e.parent)
    seen = {start}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        if node == goal:
            return True
        for nxt in graph[node] - seen:
            seen.add(nxt)
            frontier.append(nxt)
    return False


def _unregister(F: FederationCatalog, component_id: str, repo: OntologyRepository) -> None:
    """Drop every trace of a component so it can be integrated afresh."""

    def keep(locs: list[Location]) -> list[Location]:
        return [loc for loc in locs if loc.component_id != component_id]

    def backed(locs: list[Location]) -> bool:
        return any(repo.knows(loc.local_name) for loc in locs)

    F.fact_tables = [t for t in F.fact_tables if t[0] != component_id]
    if not F.fact_tables:
        F.fact_name = None
    measures = []
    for m in F.measures:
        m.locations = keep(m.locations)
        if m.locations:
            m.ontology_backed = backed(m.locations)
            measures.append(m)
    F.measures = measures
    dimensions = []
    for d in F.dimensions:
        d.source_tables = [t for t in d.source_tables if t[0] != component_id]
        if not d.source_tables:
            continue
        attrs = []
        for a in d.attributes:
            a.locations = keep(a.locations)
            if a.locations:
                a.ontology_backed = backed(a.locations)
                attrs.append(a)
        d.attributes = attrs
        d.ontology_backed = any(repo.knows(t[1]) for t in d.source_tables)
        dimensions.append(d)
    F.dimensions = dimensions
    F.hierarchy_edges = [e for e in F.hierarchy_edges if e.fk.component_id != component_id]
    F._log(component_id, "component", "replaced", component_id, component_id)


def integrate_component(
    F: FederationCatalog, H_p: ComponentSchema, repo: OntologyRepository
) -> FederationCatalog:
    """Return a new catalog with ``H_p`` integrated; ``F`` is left untouched.

    Integrating a component whose id is already registered replaces its
    previous contribution instead of adding it twice.

    Raises:
        AggregationConflict: see :func:`integrate_measures`.
        HierarchyConflict: a parent link would close a cycle among
            federated dimensions (including a dimension merged with its
            own parent).
    """
    F = F.copy()
    cid = H_p.component_id
    existing = [i for i, c in enumerate(F.components) if c.component_id == cid]
    if existing:
        _unregister(F, cid, repo)
        F.components[existing[0]] = H_p
    else:
        F.components.append(H_p)

    integrate_measures(F, H_p, repo)
    ordered = topological_dimensions(H_p)
    for dim in ordered:
        integrate_dimension_into(F, dim, cid, repo)

    dims = {d.name: d for d in H_p.dimensions}
    for dim in ordered:
        for link in dim.parents:
            child = repo.concept_of(dim.name)
            parent = repo.concept_of(link.dimension)
            child_fd = F.dimension_for(child)
            parent_fd = F.dimension_for(parent)
            if child == parent or _reaches(F.hierarchy_edges, parent, child):
                raise HierarchyConflict(child_fd.fed_name, parent_fd.fed_name)
            edge = HierarchyEdge(
                child=child_fd.concept,
                parent=parent_fd.concept,
                fk=Location(cid, dim.name, link.fk),
                key=Location(cid, link.dimension, dims[link.dimension].primary_key),
                ontology_confirmed=parent in repo.parents_of(child),
            )
            F.hierarchy_edges.append(edge)
            F._log(cid, "hierarchy", "linked", f"{dim.name}->{link.dimension}",
                   f"{child_fd.fed_name}->{parent_fd.fed_name}")
    return F


def build_federation(
    components: Iterable[ComponentSchema], repo: OntologyRepository
) -> FederationCatalog:
    """Fold the components, in order, into an initially empty catalog.

    Raises:
        DuplicateName: two components share a ``component_id``.
    """
    components = list(components)
    seen: set[str] = set()
    for comp in components:
        if comp.component_id in seen:
            raise DuplicateName("federation", comp.component_id)
        seen.add(comp.component_id)
    F = FederationCatalog()
    for comp in components:
        F = integrate_component(F, comp, repo)
    return F


# -- comparison views ---------------------------------------------------------


def canonical_form(F: FederationCatalog) -> tuple:
    """Label-free view of a catalog keyed by concept.

    Two catalogs with equal canonical forms group the same locations into
    the same federated elements, whatever their display names or list order.
    """
    measures = frozenset((m.concept.key, m.aggregation, frozenset(m.locations)) for m in F.measures)
    dimensions = frozenset(
        (
            d.concept.key,
            frozenset(d.source_tables),
            frozenset((a.concept.key, frozenset(a.locations)) for a in d.attributes),
        )
        for d in F.dimensions
    )
    edges = frozenset((e.child.key, e.parent.key, e.fk, e.key) for e in F.hierarchy_edges)
    return measures, dimensions, edges


def inventory_sets(F: FederationCatalog) -> frozenset:
    """The partition of locations into federated elements, nothing else."""
    groups = [frozenset(m.locations) for m in F.measures]
    groups += [frozenset(a.locations) for d in F.dimensions for a in d.attributes]
    return frozenset(groups)


# -- reporting ----------------------------------------------------------------


@dataclass
class MappingReport:
    entries: list[dict]
    warnings: list[dict]

    def to_dict(self) -> dict:
        return {"elements": self.entries, "warnings": self.warnings}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        lines: list[str] = []
        for e in self.entries:
            if e["kind"] == "hierarchy":
                mark = " (ontology)" if e["ontology_confirmed"] else ""
                lines.append(f"hierarchy {e['child']} -> {e['parent']} via {e['fk']} = {e['key']}{mark}")
                continue
            head = f"{e['kind']} {e['name']}"
            if e["kind"] == "attribute":
                head = f"  {'key' if e['key'] else 'attribute'} {e['name']}"
            if e.get("concept") and e["concept"] != e["name"]:
                head += f" [concept {e['concept']}]"
            lines.append(head)
            indent = "      " if e["kind"] == "attribute" else "    "
            for loc in e.get("locations", []):
                lines.append(f"{indent}{loc}")
        if self.warnings:
            lines.append("unmatched singletons (candidate missed merges):")
            for w in self.warnings:
                lines.append(f"  {w['kind']} {w['name']} at {w['location']}")
        return "\n".join(lines) + ("\n" if lines else "")


def mapping_report(F: FederationCatalog) -> MappingReport:
    """List federated elements with their location inventories.

    Elements with a single location whose names never appear in the ontology
    are reported as warnings: they are where a missing synonym triple would
    most likely show up. Key attributes are listed but never warned about.
    """
    entries: list[dict] = []
    warnings: list[dict] = []

    def flag(kind: str, name: str, locs: list[Location], backed: bool) -> None:
        if len(locs) == 1 and not backed:
            warnings.append({"kind": kind, "name": name, "location": str(locs[0])})

    if F.fact_name is not None:
        entries.append(
            {
                "kind": "fact",
                "name": F.fact_name,
                "locations": [f"{c}.{t}" for c, t in F.fact_tables],
            }
        )
    for m in F.measures:
        locs = sorted(m.locations)
        entries.append(
            {
                "kind": "measure",
                "name": m.fed_name,
                "concept": m.concept.label,
                "aggregation": m.aggregation,
                "locations": [str(loc) for loc in locs],
            }
        )
        flag("measure", m.fed_name, locs, m.ontology_backed)
    for d in F.dimensions:
        entries.append(
            {
                "kind": "dimension",
                "name": d.fed_name,
                "concept": d.concept.label,
                "locations": [f"{c}.{t}" for c, t in d.source_tables],
            }
        )
        # keys after descriptive attributes
        for a in sorted(d.attributes, key=lambda a: a.is_key):
            locs = sorted(a.locations)
            entries.append(
                {
                    "kind": "attribute",
                    "dimension": d.fed_name,
                    "name": a.fed_name,
                    "concept": a.concept.label,
                    "key": a.is_key,
                    "locations": [str(loc) for loc in locs],
                }
            )
            if not a.is_key:
                flag("attribute", f"{d.fed_name}.{a.fed_name}", locs, a.ontology_backed)
    names = {d.concept: d.fed_name for d in F.dimensions}
    for e in F.hierarchy_edges:
        entries.append(
            {
                "kind": "hierarchy",
                "child": names.get(e.child, e.child.label),
                "parent": names.get(e.parent, e.parent.label),
                "fk": str(e.fk),
                "key": str(e.key),
                "ontology_confirmed": e.ontology_confirmed,
            }
        )
    return MappingReport(entries, warnings)
