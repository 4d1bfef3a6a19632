from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedwh.errors import ConflictingOverride, HierarchyCycle, MalformedOverride, MalformedTriple
from fedwh.ontology import (
    Override,
    Triple,
    build_repository,
    parse_ontology,
    parse_overrides,
)


def closure_classes(terms, edges):
    """Brute-force equivalence closure: merge sets until nothing changes."""
    classes = [{t} for t in terms]
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            ca = next(c for c in classes if a in c)
            cb = next(c for c in classes if b in c)
            if ca is not cb:
                ca |= cb
                classes.remove(cb)
                changed = True
    return classes


class TestParse:
    def test_single_synonym(self):
        assert parse_ontology("Customer synonymOf Client") == [Triple("Customer", "synonymOf", "Client")]

    def test_empty_document(self):
        assert parse_ontology("") == []

    def test_arity_violation(self):
        with pytest.raises(MalformedTriple) as exc:
            parse_ontology("City parentOf Region extra")
        assert exc.value.line == 1

    def test_unknown_predicate_reports_line(self):
        with pytest.raises(MalformedTriple) as exc:
            parse_ontology("# header\n\nA synonymOf B\nA subClassOf B\n")
        assert exc.value.line == 4

    def test_whitespace_runs_and_comments(self):
        text = "  # comment\nA \t synonymOf    B\n\n   \nC parentOf D\n"
        assert parse_ontology(text) == [Triple("A", "synonymOf", "B"), Triple("C", "parentOf", "D")]

    def test_overrides(self):
        assert parse_overrides("force-similar a b\n# x\nforce-distinct c d\n") == [
            Override("force-similar", "a", "b"),
            Override("force-distinct", "c", "d"),
        ]
        with pytest.raises(MalformedOverride):
            parse_overrides("force-maybe a b")


class TestBuild:
    def test_synonym_shares_concept(self):
        repo = build_repository([Triple("Customer", "synonymOf", "Client")])
        assert repo.concept_of("Customer") == repo.concept_of("Client")
        assert repo.similar("Customer", "Client")

    def test_case_insensitive_identity_without_triples(self):
        repo = build_repository([])
        assert repo.concept_of("X") == repo.concept_of("x")
        assert repo.concept_of(" Region ") == repo.concept_of("region")

    def test_two_cycle(self):
        with pytest.raises(HierarchyCycle) as exc:
            build_repository([Triple("A", "parentOf", "B"), Triple("B", "parentOf", "A")])
        assert exc.value.concepts == ["A", "B"]

    def test_cycle_through_synonyms(self):
        with pytest.raises(HierarchyCycle):
            build_repository([Triple("A", "parentOf", "B"), Triple("B", "synonymOf", "A")])

    def test_reflexive(self):
        assert build_repository([]).similar("Region", "Region")

    def test_empty_ontology_distinct_terms(self):
        # zero edges: every term is its own class
        classes = closure_classes(["Price", "Country"], [])
        expected = any({"Price", "Country"} <= c for c in classes)
        assert build_repository([]).similar("Price", "Country") is expected is False

    def test_label_is_smallest_spelling(self):
        repo = build_repository([Triple("price", "synonymOf", "cost"), Triple("Cost", "synonymOf", "amount")])
        assert repo.concept_of("price").label == "Cost"
        assert repo.label_of("unknown") is None

    def test_isa_stored_but_inert(self):
        repo = build_repository([Triple("Client", "isA", "Person")])
        assert not repo.similar("Client", "Person")
        assert repo.isa_of(repo.concept_of("Client")) == {repo.concept_of("Person")}


class TestOverrides:
    def test_force_similar(self):
        repo = build_repository([], [Override("force-similar", "cost", "price")])
        assert repo.similar("cost", "price")

    def test_force_distinct_removes_edge(self):
        repo = build_repository(
            [Triple("cost", "synonymOf", "price")], [Override("force-distinct", "price", "cost")]
        )
        assert not repo.similar("cost", "price")

    def test_force_distinct_splits_only_that_edge(self):
        triples = [Triple("a", "synonymOf", "b"), Triple("b", "synonymOf", "c")]
        repo = build_repository(triples, [Override("force-distinct", "b", "c")])
        assert repo.similar("a", "b") and not repo.similar("b", "c")

    def test_same_pair_both_ways(self):
        with pytest.raises(ConflictingOverride):
            build_repository(
                [], [Override("force-similar", "a", "b"), Override("force-distinct", "B", "A")]
            )

    def test_distinct_pair_still_connected(self):
        triples = [Triple("a", "synonymOf", "b"), Triple("b", "synonymOf", "c"), Triple("a", "synonymOf", "c")]
        with pytest.raises(ConflictingOverride):
            build_repository(triples, [Override("force-distinct", "a", "c")])


class TestParents:
    def test_sub_category(self):
        repo = build_repository([Triple("Category", "parentOf", "sub_Category")])
        assert repo.parents_of(repo.concept_of("sub_Category")) == {repo.concept_of("Category")}

    def test_isolated(self):
        repo = build_repository([Triple("A", "synonymOf", "B")])
        assert repo.parents_of(repo.concept_of("A")) == set()

    def test_not_transitive(self):
        triples = [Triple("Region", "parentOf", "City"), Triple("Country", "parentOf", "Region")]
        repo = build_repository(triples)
        # enumerate the direct edges by hand: only Region is a parent of City
        direct = {t.subject for t in triples if t.predicate == "parentOf" and t.object == "City"}
        assert {c.label for c in repo.parents_of(repo.concept_of("City"))} == direct == {"Region"}


class TestValues:
    def test_lexicographic_min(self):
        repo = build_repository([Triple("UK", "sameValue", "United_Kingdom")])
        assert repo.canonical_value("United_Kingdom") == min(["UK", "United_Kingdom"]) == "UK"

    def test_unmapped(self):
        assert build_repository([]).canonical_value("Morocco") == "Morocco"

    def test_chain(self):
        edges = [("A", "B"), ("B", "C")]
        repo = build_repository([Triple(a, "sameValue", b) for a, b in edges])
        cls = next(c for c in closure_classes(["A", "B", "C"], edges) if "C" in c)
        assert repo.canonical_value("C") == min(cls) == "A"

    def test_values_are_case_sensitive(self):
        repo = build_repository([Triple("UK", "sameValue", "United_Kingdom")])
        assert repo.canonical_value("uk") == "uk"


# -- properties ---------------------------------------------------------------

terms = st.sampled_from(["a", "A", "b", "c", "C", "d", "e", "f"])
synonym_triples = st.lists(st.tuples(terms, terms).map(lambda p: Triple(p[0], "synonymOf", p[1])), max_size=8)


@settings(max_examples=150, deadline=None)
@given(synonym_triples)
def test_similar_is_equivalence(triples):
    repo = build_repository(triples)
    universe = ["a", "A", "b", "c", "C", "d", "e", "f", "zz"]
    for x in universe:
        assert repo.similar(x, x)
    for x, y in itertools.product(universe, repeat=2):
        assert repo.similar(x, y) == repo.similar(y, x)
    for x, y, z in itertools.product(universe, repeat=3):
        if repo.similar(x, y) and repo.similar(y, z):
            assert repo.similar(x, z)


@settings(max_examples=150, deadline=None)
@given(synonym_triples)
def test_similar_matches_brute_force_closure(triples):
    repo = build_repository(triples)
    universe = sorted({t.lower() for t in ["a", "b", "c", "d", "e", "f"]})
    edges = [(t.subject.lower(), t.object.lower()) for t in triples]
    classes = closure_classes(universe, edges)
    for x, y in itertools.product(universe, repeat=2):
        same = any(x in c and y in c for c in classes)
        assert repo.similar(x, y) == same


@settings(max_examples=100, deadline=None)
@given(synonym_triples, st.tuples(terms, terms))
def test_adding_synonym_is_monotone(triples, extra):
    before = build_repository(triples)
    after = build_repository(triples + [Triple(extra[0], "synonymOf", extra[1])])
    universe = ["a", "b", "c", "d", "e", "f"]
    for x, y in itertools.product(universe, repeat=2):
        if before.similar(x, y):
            assert after.similar(x, y)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_build_is_order_independent(data):
    triples = data.draw(synonym_triples)
    triples += data.draw(st.lists(st.tuples(terms, terms).map(lambda p: Triple(p[0], "sameValue", p[1])), max_size=4))
    perm = data.draw(st.permutations(triples))
    a, b = build_repository(triples), build_repository(perm)
    assert a.partition() == b.partition()
    assert a.labels == b.labels
    assert a.parent_edges == b.parent_edges
    assert a.value_canon == b.value_canon


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(terms, terms).map(lambda p: Triple(p[0], "sameValue", p[1])), max_size=6), terms)
def test_canonical_value_idempotent(triples, v):
    repo = build_repository(triples)
    once = repo.canonical_value(v)
    assert repo.canonical_value(once) == once


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(terms, terms), max_size=6))
def test_parent_graph_acyclic_or_rejected(pairs):
    triples = [Triple(p, "parentOf", c) for p, c in pairs]
    try:
        repo = build_repository(triples)
    except HierarchyCycle:
        return
    # no concept reaches itself
    graph = {}
    for child, parent in repo.parent_edges:
        graph.setdefault(child, set()).add(parent)
    for start in graph:
        seen, stack = set(), list(graph[start])
        while stack:
            n = stack.pop()
            assert n != start
            if n not in seen:
                seen.add(n)
                stack.extend(graph.get(n, ()))
