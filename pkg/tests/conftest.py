from __future__ import annotations

from pathlib import Path

import pytest

from obdastream.engine.windows import read_stream_csv
from obdastream.mappings import load_mappings, load_tables
from obdastream.ontology import load_dataset, load_ontology
from obdastream.starql import parse_file

FIXTURES = Path(__file__).parent / "fixtures"
LIVE = "sensorMeasurements"
REFERENCE = "referenceSensorMeasurements"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def running_ontology():
    return load_ontology(FIXTURES / "running.onto")


@pytest.fixture
def running_dataset():
    return load_dataset(FIXTURES / "running.csv")


@pytest.fixture
def running_mappings():
    return load_mappings(FIXTURES / "running.map")


@pytest.fixture
def running_tables():
    return load_tables(FIXTURES / "tables")


@pytest.fixture
def critical_query():
    return parse_file(FIXTURES / "critical_mode.starql")


@pytest.fixture
def running_sources():
    return {
        LIVE: read_stream_csv(FIXTURES / "live.csv", LIVE),
        REFERENCE: read_stream_csv(FIXTURES / "reference.csv", REFERENCE),
    }


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
