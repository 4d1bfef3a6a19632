from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedwh.executor import load_tables  # noqa: E402
from fedwh.integrator import build_federation  # noqa: E402
from fedwh.ontology import load_repository  # noqa: E402
from fedwh.schema_model import load_component  # noqa: E402

HOTEL = Path(__file__).parent / "fixtures" / "hotel"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def hotel_dir() -> Path:
    return HOTEL


@pytest.fixture
def hotel_repo():
    return load_repository([HOTEL / "ontology" / "dw1.onto", HOTEL / "ontology" / "federation.onto"])


@pytest.fixture
def dw1():
    return load_component(HOTEL / "dw1")


@pytest.fixture
def dw2():
    return load_component(HOTEL / "dw2")


@pytest.fixture
def hotel_catalog(dw1, dw2, hotel_repo):
    return build_federation([dw1, dw2], hotel_repo)


@pytest.fixture
def hotel_tables(dw1, dw2):
    return {"DW1": load_tables(dw1), "DW2": load_tables(dw2)}


@pytest.fixture
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
