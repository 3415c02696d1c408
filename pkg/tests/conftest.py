import copy

import pytest

from gen import FIXTURES
from mdq.parser import load_data, parse_file, read_tables

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def _hospital():
    return parse_file(FIXTURES / "hospital.mdq")


@pytest.fixture
def hospital(_hospital):
    return copy.deepcopy(_hospital)


@pytest.fixture(scope="session")
def _discharge():
    return parse_file(FIXTURES / "discharge.mdq")


@pytest.fixture
def discharge(_discharge):
    return copy.deepcopy(_discharge)


@pytest.fixture
def hospital_db(hospital):
    return load_data(hospital, read_tables(hospital, FIXTURES / "data"))


@pytest.fixture
def discharge_db(discharge):
    return load_data(discharge, read_tables(discharge, FIXTURES / "data"))
