"""Exception hierarchy for the federation engine.

Every domain failure derives from :class:`FederationError`; the CLI maps
those to exit status 1. Each class keeps its identifying fields as
attributes so callers and tests can inspect them without parsing messages.
"""

from __future__ import annotations


class FederationError(Exception):
    """Base class for all domain errors.

    ``source`` is filled in by loaders (file path) so messages carry file
    context when surfaced by the CLI.
    """

    source: str | None = None

    def with_source(self, source: str) -> "FederationError":
        self.source = source
        return self

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.source}: {msg}" if self.source else msg


# -- ontology -----------------------------------------------------------------


class MalformedTriple(FederationError):
    def __init__(self, line: int, reason: str = "expected 'subject predicate object'"):
        super().__init__(f"MalformedTriple at line {line}: {reason}")
        self.line = line


class MalformedOverride(FederationError):
    def __init__(self, line: int, reason: str = "expected 'force-similar|force-distinct a b'"):
        super().__init__(f"MalformedOverride at line {line}: {reason}")
        self.line = line


class HierarchyCycle(FederationError):
    def __init__(self, concepts: list[str]):
        super().__init__(f"HierarchyCycle: {' -> '.join(concepts)}")
        self.concepts = concepts


class ConflictingOverride(FederationError):
    def __init__(self, a: str, b: str, reason: str = "pair forced both similar and distinct"):
        super().__init__(f"ConflictingOverride({a}, {b}): {reason}")
        self.pair = (a, b)


# -- component descriptors ----------------------------------------------------


class ParseError(FederationError):
    def __init__(self, location: str, reason: str):
        super().__init__(f"ParseError at {location}: {reason}")
        self.location = location


class DanglingParent(FederationError):
    def __init__(self, dim: str, parent: str):
        super().__init__(f"DanglingParent: {dim} references undeclared dimension {parent}")
        self.dim = dim
        self.parent = parent


class ParentCycle(FederationError):
    def __init__(self, dims: list[str]):
        super().__init__(f"ParentCycle: {' -> '.join(dims)}")
        self.dims = dims


class DuplicateName(FederationError):
    def __init__(self, scope: str, name: str):
        super().__init__(f"DuplicateName: {name!r} declared twice in {scope}")
        self.scope = scope
        self.name = name


# -- integration --------------------------------------------------------------


class AggregationConflict(FederationError):
    def __init__(self, fed_name: str, existing: str, incoming: str):
        super().__init__(
            f"AggregationConflict({fed_name}): federated default {existing}, incoming {incoming}"
        )
        self.fed_name = fed_name


class HierarchyConflict(FederationError):
    def __init__(self, child: str, parent: str):
        super().__init__(f"HierarchyConflict: edge {child} -> {parent} would close a cycle")
        self.child = child
        self.parent = parent


# -- queries ------------------------------------------------------------------


class QuerySyntaxError(FederationError):
    def __init__(self, position: int, expected: str, found: str = ""):
        detail = f", found {found!r}" if found else ""
        super().__init__(f"SyntaxError at position {position}: expected {expected}{detail}")
        self.position = position
        self.expected = expected


class UnknownName(FederationError):
    def __init__(self, name: str, kind: str = "element"):
        super().__init__(f"UnknownName: no federated {kind} named {name!r}")
        self.name = name


class Unanswerable(FederationError):
    def __init__(self, excluded: list[str] | None = None):
        excluded = excluded or []
        tail = f" (excluded: {', '.join(excluded)})" if excluded else ""
        super().__init__(f"Unanswerable: no component can answer the query{tail}")
        self.excluded = excluded


# -- execution ----------------------------------------------------------------


class MissingTable(FederationError):
    def __init__(self, name: str):
        super().__init__(f"MissingTable: {name}")
        self.name = name


class HeaderMismatch(FederationError):
    def __init__(self, table: str, expected: list[str], found: list[str]):
        super().__init__(
            f"HeaderMismatch in {table}: expected {sorted(expected)}, found {sorted(found)}"
        )
        self.table = table
        self.expected = expected
        self.found = found


class CellTypeError(FederationError):
    def __init__(self, table: str, row: int, column: str, value: str):
        super().__init__(f"CellTypeError in {table} row {row}, column {column}: {value!r} is not numeric")
        self.table = table
        self.row = row
        self.column = column


class DuplicateKey(FederationError):
    def __init__(self, table: str, key: str):
        super().__init__(f"DuplicateKey: {table} has key {key!r} more than once")
        self.table = table
        self.key = key


class ShapeMismatch(FederationError):
    def __init__(self, component_id: str, expected: list[str], found: list[str]):
        super().__init__(f"ShapeMismatch({component_id}): expected columns {expected}, found {found}")
        self.component_id = component_id


class CatalogMismatch(FederationError):
    """Raised when a saved catalog does not match the configured components."""
