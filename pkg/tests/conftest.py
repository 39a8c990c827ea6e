import numpy as np
import pytest
from hypothesis import settings

from specloc.geometry import CellGeometry, DomainSpec, build_cell_mesh

settings.register_profile("specloc", max_examples=30, deadline=None)
settings.load_profile("specloc")


@pytest.fixture(scope="session")
def ref_cell():
    """The reference cell: r = 0.25, 64-gon, h = 1/16."""
    return build_cell_mesh(CellGeometry())


@pytest.fixture(scope="session")
def coarse_cell_geom():
    return CellGeometry(0.25, 16, 0.2)


@pytest.fixture(scope="session")
def coarse_cell(coarse_cell_geom):
    return build_cell_mesh(coarse_cell_geom)


@pytest.fixture(scope="session")
def coarse_spec(coarse_cell_geom):
    """eps = 1/2 on (-1, 1)^2 with a coarse cell, about 1200 vertices."""
    return DomainSpec(0.5, 1.0, coarse_cell_geom)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
