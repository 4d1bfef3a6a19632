"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
module. Both expose ``build_index``, ``probe``, ``gather`` and
``group_aggregate`` with identical results.
"""

from __future__ import annotations

from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

SUM, COUNT, MIN, MAX = _pykernels.SUM, _pykernels.COUNT, _pykernels.MIN, _pykernels.MAX
OPCODES = {"SUM": SUM, "COUNT": COUNT, "MIN": MIN, "MAX": MAX}

BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

_active: ModuleType = _ckernels if _ckernels is not None else _pykernels


def backend_name() -> str:
    return "compiled" if _active is _ckernels and _ckernels is not None else "python"


def use_backend(name: str) -> None:
    """Switch the process-wide backend (``"python"`` or ``"compiled"``)."""
    global _active
    try:
        _active = BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def build_index(column: list) -> tuple[dict, object]:
    return _active.build_index(column)


def probe(index: dict, fk_column: list, rows: list[int]) -> list[int]:
    return _active.probe(index, fk_column, rows)


def gather(column: list, rows: list[int]) -> list:
    return _active.gather(column, rows)


def group_aggregate(keys: list, columns: list[list], ops: list[int]) -> tuple[list, list[list]]:
    return _active.group_aggregate(keys, columns, ops)
