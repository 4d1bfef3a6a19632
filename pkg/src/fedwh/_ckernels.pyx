# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels for hash joins and grouped aggregation.

Mirrors ``fedwh._pykernels`` exactly, including accumulation order, so both
backends produce bit-identical floats.
"""

cdef enum:
    SUM = 0
    COUNT = 1
    MIN = 2
    MAX = 3


def build_index(list column):
    cdef dict index = {}
    cdef Py_ssize_t i, n = len(column)
    cdef object key
    for i in range(n):
        key = column[i]
        if key is None:
            continue
        if key in index:
            return index, key
        index[key] = i
    return index, None


def probe(dict index, list fk_column, list rows):
    cdef Py_ssize_t i, n = len(rows)
    cdef Py_ssize_t r
    cdef list out = [None] * n
    cdef Py_ssize_t m = len(fk_column)
    cdef object v, hit
    for i in range(n):
        r = rows[i]
        if r < 0:
            out[i] = -1
            continue
        if r >= m:
            raise IndexError(f"row reference {r} out of range")
        v = fk_column[r]
        if v is None:
            out[i] = -1
            continue
        hit = index.get(v)
        out[i] = -1 if hit is None else hit
    return out


def gather(list column, list rows):
    cdef Py_ssize_t i, r, n = len(rows), m = len(column)
    cdef list out = [None] * n
    for i in range(n):
        r = rows[i]
        if r < 0 or r >= m:
            raise IndexError(f"row reference {r} out of range")
        out[i] = column[r]
    return out


def group_aggregate(list keys, list columns, list ops):
    cdef Py_ssize_t ncol = len(ops)
    cdef Py_ssize_t n = len(keys)
    cdef Py_ssize_t i, j, g
    cdef int op
    cdef dict slots = {}
    cdef list order = []
    cdef list acc = []
    cdef list row
    cdef list col
    cdef object key, v, cur, hit
    cdef int[64] opcodes
    cdef list cols = list(columns)
    if ncol > 64:
        raise ValueError("at most 64 measure columns")
    if len(cols) != ncol or any(len(c) != n for c in cols):
        raise ValueError("columns must match ops and keys in length")
    for j in range(ncol):
        opcodes[j] = ops[j]
    for i in range(n):
        key = keys[i]
        hit = slots.get(key)
        if hit is None:
            g = len(order)
            slots[key] = g
            order.append(key)
            row = [0 if opcodes[j] == COUNT else None for j in range(ncol)]
            acc.append(row)
        else:
            g = hit
            row = acc[g]
        for j in range(ncol):
            col = cols[j]
            v = col[i]
            if v is None:
                continue
            op = opcodes[j]
            cur = row[j]
            if op == COUNT:
                row[j] = cur + 1
            elif cur is None:
                row[j] = v
            elif op == SUM:
                row[j] = cur + v
            elif op == MIN:
                if v < cur:
                    row[j] = v
            elif v > cur:
                row[j] = v
    return order, acc
