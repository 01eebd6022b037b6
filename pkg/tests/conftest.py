import pytest

from msdiff.analytic import invariant_density, scale_tables
from msdiff.model import ModelSpec, homogenize


@pytest.fixture(scope="session")
def langevin():
    return ModelSpec.langevin(1.0, 1.0, 0.2)


@pytest.fixture(scope="session")
def limit(langevin):
    return homogenize(langevin)


@pytest.fixture(scope="session")
def density(langevin, limit):
    return invariant_density(langevin, limit)


@pytest.fixture(scope="session")
def scales(langevin, limit):
    return scale_tables(langevin, limit)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
