from __future__ import annotations

import csv
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from coopetition.graph import Graph

DATA = Path(__file__).parent / "data"

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def load_karate() -> Graph:
    with open(DATA / "karate.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return Graph.from_edges(34, [(int(r["source"]), int(r["target"]), 1.0) for r in rows])


@pytest.fixture
def karate() -> Graph:
    return load_karate()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}")
