from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedwh import kernels
from fedwh.kernels import COUNT, MAX, MIN, SUM

compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")

keys_st = st.lists(st.one_of(st.none(), st.sampled_from(["a", "b", "c", "1", "2"])), max_size=40)
values_st = st.one_of(st.none(), st.integers(-40, 40).map(lambda v: v / 4))


def brute_aggregate(keys, columns, ops):
    groups = list(dict.fromkeys(keys))
    out = []
    for g in groups:
        row = []
        for col, op in zip(columns, ops):
            vals = [v for k, v in zip(keys, col) if k == g and v is not None]
            if op == COUNT:
                row.append(len(vals))
            elif not vals:
                row.append(None)
            else:
                row.append({SUM: sum, MIN: min, MAX: max}[op](vals))
        out.append(row)
    return groups, out


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    return kernels.BACKENDS[request.param]


def test_active_backend_is_known():
    assert kernels.backend_name() in kernels.BACKENDS


def test_use_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_use_backend_switches():
    before = kernels.backend_name()
    try:
        kernels.use_backend("python")
        assert kernels.backend_name() == "python"
    finally:
        kernels.use_backend(before)


def test_build_index(backend):
    index, dup = backend.build_index(["x", None, "y"])
    assert index == {"x": 0, "y": 2} and dup is None
    assert backend.build_index(["x", "y", "x"])[1] == "x"


def test_probe_misses(backend):
    index = {"a": 0, "b": 1}
    assert backend.probe(index, ["b", "zz", None, "a"], [0, 1, 2, 3, -1]) == [1, -1, -1, 0, -1]


def test_empty_inputs(backend):
    assert backend.group_aggregate([], [[]], [SUM]) == ([], [])
    assert backend.gather([1, 2], []) == []


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_group_aggregate_matches_brute_force(data):
    keys = data.draw(keys_st)
    ops = data.draw(st.lists(st.sampled_from([SUM, COUNT, MIN, MAX]), min_size=1, max_size=4))
    columns = [data.draw(st.lists(values_st, min_size=len(keys), max_size=len(keys))) for _ in ops]
    expected = brute_aggregate(keys, columns, ops)
    for backend in kernels.BACKENDS.values():
        groups, acc = backend.group_aggregate(keys, columns, ops)
        assert (list(groups), [list(r) for r in acc]) == expected


@compiled
@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(st.none(), st.sampled_from(["k1", "k2", "k3", "k4"])), max_size=30), st.data())
def test_backends_agree_on_joins(fks, data):
    py, c = kernels.BACKENDS["python"], kernels.BACKENDS["compiled"]
    pk = data.draw(st.lists(st.sampled_from(["k1", "k2", "k3", "k5"]), unique=True))
    assert py.build_index(pk) == c.build_index(pk)
    index = py.build_index(pk)[0]
    rows = data.draw(st.lists(st.integers(-1, max(len(fks) - 1, -1)), max_size=20)) if fks else []
    assert py.probe(index, fks, rows) == c.probe(index, fks, rows)
    live = [r for r in rows if r >= 0]
    assert py.gather(fks, live) == c.gather(fks, live)


def test_bad_row_references_raise(backend):
    with pytest.raises(IndexError):
        backend.gather([1, 2], [-1])
    with pytest.raises(IndexError):
        backend.gather([1, 2], [2])
    with pytest.raises(IndexError):
        backend.probe({}, [1], [5])
    with pytest.raises(ValueError):
        backend.group_aggregate(["a"], [[]], [SUM])
