"""Ontology repository: synonym classes, parent-of hierarchy, value synonymy.

Ontology files are plain text with one ``subject predicate object`` triple
per line. Four predicates are understood:

``synonymOf``
    the two terms name the same concept (dimension, attribute or measure).
``parentOf``
    the subject is the parent level of the object (``Country parentOf Region``).
``isA``
    the subject specializes the object. Stored, never used for merging.
``sameValue``
    two literal data values denote the same thing (``UK sameValue United_Kingdom``).

Terms are compared case-insensitively after trimming, so ``Client`` and
``client`` always share a concept even without a triple.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ConflictingOverride, HierarchyCycle, MalformedOverride, MalformedTriple

PREDICATES = ("synonymOf", "isA", "parentOf", "sameValue")
OVERRIDE_KINDS = ("force-similar", "force-distinct")


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: str


@dataclass(frozen=True)
class Override:
    """An expert decision that wins over triple-derived similarity."""

    kind: str
    a: str
    b: str


@dataclass(frozen=True)
class ConceptId:
    """Identity of a synonym class.

    Equality and hashing use ``key`` only; ``label`` is the display term.
    """

    key: str
    label: str = field(compare=False)

    def __str__(self) -> str:
        return self.label


def normalize(term: str) -> str:
    return term.strip().casefold()


class _DisjointSet:
    def __init__(self) -> None:
        self._parent: dict[str, str] = {}

    def add(self, x: str) -> None:
        self._parent.setdefault(x, x)

    def find(self, x: str) -> str:
        self.add(x)
        root = x
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[x] != root:
            self._parent[x], x = root, self._parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller root wins so the structure does not depend on union order
            if rb < ra:
                ra, rb = rb, ra
            self._parent[rb] = ra

    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for x in self._parent:
            out[self.find(x)].append(x)
        return out


def _tokenize_lines(text: str) -> Iterable[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def parse_ontology(text: str) -> list[Triple]:
    """Parse an ontology document into triples.

    Raises:
        MalformedTriple: a line does not have exactly three tokens or uses an
            unknown predicate. ``line`` is 1-based.
    """
    triples = []
    for lineno, tokens in _tokenize_lines(text):
        if len(tokens) != 3:
            raise MalformedTriple(lineno, f"expected 3 tokens, found {len(tokens)}")
        subject, predicate, obj = tokens
        if predicate not in PREDICATES:
            raise MalformedTriple(lineno, f"unknown predicate {predicate!r}")
        triples.append(Triple(subject, predicate, obj))
    return triples


def parse_overrides(text: str) -> list[Override]:
    overrides = []
    for lineno, tokens in _tokenize_lines(text):
        if len(tokens) != 3:
            raise MalformedOverride(lineno, f"expected 3 tokens, found {len(tokens)}")
        kind, a, b = tokens
        if kind not in OVERRIDE_KINDS:
            raise MalformedOverride(lineno, f"unknown decision {kind!r}")
        overrides.append(Override(kind, a, b))
    return overrides


@dataclass(frozen=True)
class OntologyRepository:
    """Immutable result of :func:`build_repository`.

    Concept keys are the smallest normalized term of each synonym class;
    labels are the smallest surface spelling seen in the input.
    """

    class_of: dict[str, str]
    labels: dict[str, str]
    members: dict[str, tuple[str, ...]]
    parent_edges: frozenset[tuple[str, str]]
    isa_edges: frozenset[tuple[str, str]]
    value_canon: dict[str, str]
    value_members: dict[str, tuple[str, ...]]
    overrides: tuple[Override, ...] = ()

    def knows(self, term: str) -> bool:
        """True when the term occurs in any concept triple or override."""
        return normalize(term) in self.class_of

    def concept_of(self, term: str) -> ConceptId:
        norm = normalize(term)
        key = self.class_of.get(norm)
        if key is None:
            return ConceptId(norm, term.strip())
        return ConceptId(key, self.labels[key])

    def label_of(self, term: str) -> str | None:
        """Canonical class label, or None for terms outside the ontology."""
        key = self.class_of.get(normalize(term))
        return None if key is None else self.labels[key]

    def similar(self, a: str, b: str) -> bool:
        return self.concept_of(a) == self.concept_of(b)

    def parents_of(self, concept: ConceptId) -> set[ConceptId]:
        return {
            ConceptId(p, self.labels.get(p, p))
            for c, p in self.parent_edges
            if c == concept.key
        }

    def isa_of(self, concept: ConceptId) -> set[ConceptId]:
        return {
            ConceptId(g, self.labels.get(g, g))
            for s, g in self.isa_edges
            if s == concept.key
        }

    def canonical_value(self, value: str) -> str:
        return self.value_canon.get(value, value)

    def value_class(self, value: str) -> tuple[str, ...]:
        """All spellings sharing ``value``'s canonical form, sorted."""
        canon = self.value_canon.get(value)
        if canon is None:
            return (value,)
        return self.value_members[canon]

    def partition(self) -> frozenset[frozenset[str]]:
        """Synonym classes as sets of normalized terms (order-free view)."""
        groups: dict[str, set[str]] = defaultdict(set)
        for norm, key in self.class_of.items():
            groups[key].add(norm)
        return frozenset(frozenset(g) for g in groups.values())


def empty_repository() -> OntologyRepository:
    return build_repository([])


def build_repository(
    triples: Iterable[Triple], overrides: Iterable[Override] = ()
) -> OntologyRepository:
    """Close the triples into a queryable repository.

    Synonym classes come from a disjoint-set union over ``synonymOf`` edges and
    case-insensitive identity. Overrides are applied afterwards:
    ``force-similar`` adds an edge, ``force-distinct`` removes the direct
    synonym edge between the two terms.

    Raises:
        ConflictingOverride: a pair is forced both ways, or a forced-distinct
            pair stays connected through other synonym edges.
        HierarchyCycle: the concept-level parentOf graph has a cycle.
    """
    triples = list(triples)
    overrides = tuple(overrides)

    surface: dict[str, set[str]] = defaultdict(set)

    def register(term: str) -> str:
        norm = normalize(term)
        surface[norm].add(term.strip())
        return norm

    synonym_edges: set[frozenset[str]] = set()
    parent_pairs: list[tuple[str, str]] = []
    isa_pairs: list[tuple[str, str]] = []
    value_pairs: list[tuple[str, str]] = []
    for t in triples:
        if t.predicate == "sameValue":
            value_pairs.append((t.subject, t.object))
            continue
        s, o = register(t.subject), register(t.object)
        if t.predicate == "synonymOf":
            if s != o:
                synonym_edges.add(frozenset((s, o)))
        elif t.predicate == "parentOf":
            parent_pairs.append((o, s))  # stored as (child, parent)
        elif t.predicate == "isA":
            isa_pairs.append((s, o))

    forced_similar: set[frozenset[str]] = set()
    forced_distinct: dict[frozenset[str], Override] = {}
    for ov in overrides:
        a, b = register(ov.a), register(ov.b)
        pair = frozenset((a, b))
        if ov.kind == "force-similar":
            forced_similar.add(pair)
        else:
            forced_distinct[pair] = ov
    for pair, ov in forced_distinct.items():
        if pair in forced_similar:
            raise ConflictingOverride(ov.a, ov.b)

    dsu = _DisjointSet()
    for norm in surface:
        dsu.add(norm)
    for edge in (synonym_edges - forced_distinct.keys()) | forced_similar:
        a, *rest = sorted(edge)
        if rest:
            dsu.union(a, rest[0])
    for pair, ov in sorted(forced_distinct.items(), key=lambda kv: sorted(kv[0])):
        a, *rest = sorted(pair)
        b = rest[0] if rest else a
        if dsu.find(a) == dsu.find(b):
            raise ConflictingOverride(
                ov.a, ov.b, "terms remain connected through other synonym edges"
            )

    class_of: dict[str, str] = {}
    labels: dict[str, str] = {}
    members: dict[str, tuple[str, ...]] = {}
    for group in dsu.groups().values():
        key = min(group)
        spellings = sorted(s for norm in group for s in surface[norm])
        labels[key] = spellings[0]
        members[key] = tuple(spellings)
        for norm in group:
            class_of[norm] = key

    parent_edges = frozenset((class_of[c], class_of[p]) for c, p in parent_pairs)
    _check_acyclic(parent_edges, labels)
    isa_edges = frozenset((class_of[s], class_of[g]) for s, g in isa_pairs)

    values = _DisjointSet()
    for a, b in value_pairs:
        values.union(a, b)
    value_canon: dict[str, str] = {}
    value_members: dict[str, tuple[str, ...]] = {}
    for group in values.groups().values():
        canon = min(group)
        value_members[canon] = tuple(sorted(group))
        for v in group:
            value_canon[v] = canon

    return OntologyRepository(
        class_of=class_of,
        labels=labels,
        members=members,
        parent_edges=parent_edges,
        isa_edges=isa_edges,
        value_canon=value_canon,
        value_members=value_members,
        overrides=overrides,
    )


def _check_acyclic(edges: frozenset[tuple[str, str]], labels: dict[str, str]) -> None:
    graph: dict[str, list[str]] = defaultdict(list)
    for child, parent in sorted(edges):
        graph[child].append(parent)

    WHITE, GREY, BLACK = 0, 1, 2
    color: dict[str, int] = defaultdict(int)
    stack: list[str] = []

    def visit(node: str) -> None:
        color[node] = GREY
        stack.append(node)
        for nxt in graph[node]:
            if color[nxt] == GREY:
                cycle = stack[stack.index(nxt):]
                names = [labels.get(k, k) for k in cycle]
                i = names.index(min(names))
                raise HierarchyCycle(names[i:] + names[:i])
            if color[nxt] == WHITE:
                visit(nxt)
        stack.pop()
        color[node] = BLACK

    for node in sorted(graph):
        if color[node] == WHITE:
            visit(node)


def load_repository(
    ontology_files: Iterable[str | Path], override_file: str | Path | None = None
) -> OntologyRepository:
    """Read ontology and override files from disk and build the repository.

    Parse errors are tagged with the offending file path.
    """
    triples: list[Triple] = []
    for path in ontology_files:
        text = Path(path).read_text(encoding="utf-8")
        try:
            triples.extend(parse_ontology(text))
        except MalformedTriple as exc:
            raise exc.with_source(str(path))
    overrides: list[Override] = []
    if override_file is not None:
        text = Path(override_file).read_text(encoding="utf-8")
        try:
            overrides = parse_overrides(text)
        except MalformedOverride as exc:
            raise exc.with_source(str(override_file))
    return build_repository(triples, overrides)
