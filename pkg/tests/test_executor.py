from __future__ import annotations

import csv
import random
import shutil
import tempfile
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedwh.errors import (
    CellTypeError,
    DuplicateKey,
    HeaderMismatch,
    MissingTable,
    ParseError,
    ShapeMismatch,
    Unanswerable,
)
from fedwh.executor import (
    ResultTable,
    execute_federated,
    execute_global_oracle,
    execute_subquery,
    load_all_tables,
    load_tables,
    merge_in_every_order,
    merge_results,
)
from fedwh.integrator import build_federation
from fedwh.ontology import Triple, build_repository
from fedwh.query_planner import MergePlan, MergeRule, parse_query, plan
from fedwh.schema_model import load_component

from generators import add_random_data, random_federation, random_query_text


def rows_of(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def dw1_copy(tmp_path, hotel_dir):
    dst = tmp_path / "dw1"
    shutil.copytree(hotel_dir / "dw1", dst)
    return dst


class TestLoad:
    def test_file_census(self, dw1):
        tables = load_tables(dw1)
        assert set(tables) == {dw1.fact.name} | {d.name for d in dw1.dimensions}
        assert tables["Reservations"].nrows == len(rows_of(dw1.data_dir / "Reservations.csv"))

    def test_header_only(self, dw1_copy):
        (dw1_copy / "Reservations.csv").write_text("client_id,hotel_id,price,nights\n")
        assert load_tables(load_component(dw1_copy))["Reservations"].nrows == 0

    def test_missing_measure_column(self, dw1_copy):
        (dw1_copy / "Reservations.csv").write_text("client_id,hotel_id,price\n1,10,5\n")
        with pytest.raises(HeaderMismatch):
            load_tables(load_component(dw1_copy))

    def test_missing_file(self, dw1_copy):
        (dw1_copy / "Hotel.csv").unlink()
        with pytest.raises(MissingTable) as exc:
            load_tables(load_component(dw1_copy))
        assert exc.value.source.endswith("Hotel.csv")

    def test_bad_measure_cell(self, dw1_copy):
        (dw1_copy / "Reservations.csv").write_text("client_id,hotel_id,price,nights\n1,10,lots,2\n")
        with pytest.raises(CellTypeError) as exc:
            load_tables(load_component(dw1_copy))
        assert (exc.value.row, exc.value.column) == (2, "price")

    def test_duplicate_key(self, dw1_copy):
        with (dw1_copy / "Hotel.csv").open("a") as fh:
            fh.write("10,Copy,3\n")
        with pytest.raises(DuplicateKey) as exc:
            load_tables(load_component(dw1_copy))
        assert exc.value.key == "10"

    def test_ragged_row(self, dw1_copy):
        with (dw1_copy / "Hotel.csv").open("a") as fh:
            fh.write("12,Short\n")
        with pytest.raises(ParseError):
            load_tables(load_component(dw1_copy))


class TestSubquery:
    def test_empty_fact_count(self, dw1_copy):
        (dw1_copy / "Reservations.csv").write_text("client_id,hotel_id,price,nights\n")
        comp = load_component(dw1_copy)
        F = build_federation([comp], build_repository([]))
        qp = plan(parse_query("SELECT COUNT(price)"), F)
        res = execute_subquery(qp.subplans[0], load_tables(comp))
        assert res.rows == [(0,)]

    def test_dw2_by_category(self, dw2, hotel_repo, hotel_dir):
        F = build_federation([dw2], hotel_repo)
        qp = plan(parse_query("SELECT SUM(cost), category_label GROUP BY category_label"), F, hotel_repo)
        res = execute_subquery(qp.subplans[0], load_tables(dw2))
        # hand join over the CSVs
        base = hotel_dir / "dw2"
        sub = {r["sub_category_id"]: r["category_id"] for r in rows_of(base / "sub_Category.csv")}
        label = {r["category_id"]: r["category_label"] for r in rows_of(base / "Category.csv")}
        cust = {r["customer_id"]: label[sub[r["sub_category_id"]]] for r in rows_of(base / "Customer.csv")}
        expected: dict[str, float] = {}
        for r in rows_of(base / "Reservation.csv"):
            expected[cust[r["customer_id"]]] = expected.get(cust[r["customer_id"]], 0.0) + float(r["cost"])
        assert res.rows == sorted(expected.items()) == [("Business", 585.0), ("Leisure", 250.25)]

    def test_morocco_filter(self, dw1, hotel_dir):
        F = build_federation([dw1], build_repository([]))
        qp = plan(parse_query('SELECT SUM(price) WHERE Country = "Morocco"'), F)
        res = execute_subquery(qp.subplans[0], load_tables(dw1))
        clients = {r["client_id"] for r in rows_of(hotel_dir / "dw1" / "Client.csv") if r["Country"] == "Morocco"}
        total = sum(float(r["price"]) for r in rows_of(hotel_dir / "dw1" / "Reservations.csv") if r["client_id"] in clients)
        assert res.rows == [(total,)] == [(490.25,)]


def _mp(keys, aggs, rules):
    return MergePlan(
        key_columns=keys,
        canonicalize=[True] * len(keys),
        partial_aggs=aggs,
        partial_headers=[f"{a}(x)" for a in aggs],
        rules=rules,
        count_only=all(r.agg == "COUNT" for r in rules),
    )


def _partial(keys, aggs, rows):
    return ResultTable([(k, "key") for k in keys] + [(f"{a}(x)", "measure") for a in aggs], rows)


class TestMerge:
    def test_same_value_keys_collapse(self):
        repo = build_repository([Triple("UK", "sameValue", "United_Kingdom")])
        mp = _mp(["Country"], ["SUM"], [MergeRule("SUM(x)", "SUM", (0,))])
        a = _partial(["Country"], ["SUM"], [("United_Kingdom", 490.5), ("France", 120.0)])
        b = _partial(["Country"], ["SUM"], [("UK", 510.0)])
        out = merge_results([("DW1", a), ("DW2", b)], mp, repo)
        assert out.rows == [("France", 120.0), ("UK", 490.5 + 510.0)]

    def test_identity_merge(self):
        mp = _mp(["k"], ["MAX"], [MergeRule("MAX(x)", "MAX", (0,))])
        part = _partial(["k"], ["MAX"], [("b", 2.0), ("a", 1.0)])
        assert merge_results([("C", part)], mp).rows == [("a", 1.0), ("b", 2.0)]

    def test_sum_split(self, hotel_catalog, hotel_repo, hotel_tables):
        q = parse_query("SELECT SUM(price)")
        qp = plan(q, hotel_catalog, hotel_repo)
        parts = [execute_subquery(sp, hotel_tables[sp.component_id]) for sp in qp.subplans]
        merged = execute_federated(q, hotel_catalog, hotel_repo, hotel_tables)
        assert merged.rows == [(sum(p.rows[0][0] for p in parts),)]
        assert merged == execute_global_oracle(q, hotel_catalog, hotel_repo, hotel_tables)

    def test_avg_recombined(self):
        mp = _mp([], ["SUM", "COUNT"], [MergeRule("AVG(x)", "AVG", (0, 1))])
        a = _partial([], ["SUM", "COUNT"], [(10.0, 4)])
        b = _partial([], ["SUM", "COUNT"], [(2.0, 1)])
        assert merge_results([("A", a), ("B", b)], mp).rows == [(12.0 / 5,)]

    def test_shape_mismatch(self):
        mp = _mp(["k"], ["SUM"], [MergeRule("SUM(x)", "SUM", (0,))])
        with pytest.raises(ShapeMismatch):
            merge_results([("C", _partial([], ["SUM"], [(1.0,)]))], mp)

    def test_empty_global_count(self):
        mp = _mp([], ["COUNT"], [MergeRule("COUNT(x)", "COUNT", (0,))])
        assert merge_results([], mp).rows == [(0,)]
        keyed = _mp(["k"], ["COUNT"], [MergeRule("COUNT(x)", "COUNT", (0,))])
        assert merge_results([], keyed).rows == []


class TestFederated:
    def test_sum_by_country(self, hotel_catalog, hotel_repo, hotel_tables):
        q = parse_query("SELECT SUM(price), Country GROUP BY Country")
        res = execute_federated(q, hotel_catalog, hotel_repo, hotel_tables)
        assert res.rows == [("France", 120.0), ("Morocco", 715.75), ("Spain", 99.75), ("UK", 1000.5)]
        assert res == execute_global_oracle(q, hotel_catalog, hotel_repo, hotel_tables)

    def test_workers_do_not_change_result(self, hotel_catalog, hotel_repo, hotel_tables):
        q = parse_query("SELECT AVG(nights), MIN(price), Country GROUP BY Country")
        serial = execute_federated(q, hotel_catalog, hotel_repo, hotel_tables)
        assert execute_federated(q, hotel_catalog, hotel_repo, hotel_tables, workers=4) == serial

    def test_unanswerable(self, hotel_tables):
        from fedwh.integrator import FederationCatalog

        with pytest.raises(Unanswerable):
            execute_federated(parse_query("SELECT COUNT(x)"), FederationCatalog(), None, hotel_tables)

    def test_csv_and_json(self, hotel_catalog, hotel_repo, hotel_tables):
        q = parse_query("SELECT SUM(price), Country GROUP BY Country")
        res = execute_federated(q, hotel_catalog, hotel_repo, hotel_tables)
        assert res.to_csv().splitlines()[:2] == ["Country,SUM(cost)", "France,120"]
        assert '"Country": "Morocco"' in res.to_json()


def _random_instance(seed: int, root: Path, dangling: float = 0.0):
    rng = random.Random(seed)
    fed = add_random_data(rng, random_federation(rng, max_dims=5), max_rows=60, dangling=dangling)
    comps = fed.write(root)
    repo = build_repository(fed.triples)
    F = build_federation(comps, repo)
    return rng, repo, F, load_all_tables(F)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_merge_order_invariance(seed):
    with tempfile.TemporaryDirectory() as tmp:
        rng, repo, F, tables = _random_instance(seed, Path(tmp))
        text = random_query_text(rng, F)
        if text is None:
            return
        try:
            qp = plan(parse_query(text), F, repo)
        except Unanswerable:
            return
        partials = [(sp.component_id, execute_subquery(sp, tables[sp.component_id])) for sp in qp.subplans[:4]]
        results = merge_in_every_order(partials, qp.merge, repo)
        assert all(r == results[0] for r in results)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dangling_rows_match_oracle(seed):
    with tempfile.TemporaryDirectory() as tmp:
        rng, repo, F, tables = _random_instance(seed, Path(tmp), dangling=0.2)
        text = random_query_text(rng, F)
        if text is None:
            return
        q = parse_query(text)
        try:
            got = execute_federated(q, F, repo, tables)
        except Unanswerable:
            with pytest.raises(Unanswerable):
                execute_global_oracle(q, F, repo, tables)
            return
        want = execute_global_oracle(q, F, repo, tables)
        assert got.columns == want.columns
        assert got.dropped_rows == want.dropped_rows
        assert len(got.rows) == len(want.rows)
        for g, w in zip(got.rows, want.rows):
            for a, b in zip(g, w):
                if isinstance(a, float) and isinstance(b, float):
                    assert a == pytest.approx(b, rel=1e-9)
                else:
                    assert a == b
