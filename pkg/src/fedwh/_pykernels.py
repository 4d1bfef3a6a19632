"""Pure-Python kernels for hash joins and grouped aggregation.

Same contract as the compiled ``_ckernels`` extension; used when the
extension is not built. Row references are list indices, ``-1`` marks a
row that fell out of an inner join.
"""

from __future__ import annotations

SUM, COUNT, MIN, MAX = 0, 1, 2, 3


def build_index(column: list) -> tuple[dict, object]:
    """Map each non-null key to its row index.

    Returns the index and the first duplicated key (``None`` if keys are
    unique). Null keys are not indexed.
    """
    index: dict = {}
    for i, key in enumerate(column):
        if key is None:
            continue
        if key in index:
            return index, key
        index[key] = i
    return index, None


def probe(index: dict, fk_column: list, rows: list[int]) -> list[int]:
    """Follow one foreign key for each referencing row."""
    out = []
    get = index.get
    m = len(fk_column)
    for r in rows:
        if r < 0:
            out.append(-1)
            continue
        if r >= m:
            raise IndexError(f"row reference {r} out of range")
        v = fk_column[r]
        out.append(-1 if v is None else get(v, -1))
    return out


def gather(column: list, rows: list[int]) -> list:
    """Pick ``column[r]`` for each row; join misses (``-1``) are rejected."""
    if rows and min(rows) < 0:
        raise IndexError(f"row reference {min(rows)} out of range")
    return [column[r] for r in rows]


def group_aggregate(keys: list, columns: list[list], ops: list[int]) -> tuple[list, list[list]]:
    """Aggregate measure columns per distinct key, first-seen group order.

    ``None`` values are skipped. SUM, MIN and MAX of a group with no
    non-null value are ``None``; COUNT is 0. Sums accumulate in row order.
    """
    ncol = len(ops)
    if len(columns) != ncol or any(len(c) != len(keys) for c in columns):
        raise ValueError("columns must match ops and keys in length")
    slots: dict = {}
    order: list = []
    acc: list[list] = []
    for i, key in enumerate(keys):
        g = slots.get(key)
        if g is None:
            g = len(order)
            slots[key] = g
            order.append(key)
            acc.append([0 if op == COUNT else None for op in ops])
        row = acc[g]
        for j in range(ncol):
            v = columns[j][i]
            if v is None:
                continue
            op = ops[j]
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
