from __future__ import annotations

import pytest

from cybermap.analysis import ReportOptions, build_report
from cybermap.fixtures import harvard_paths, published
from cybermap.measure import read_fixture
from cybermap.taxonomy import load_registry

_acceptance: dict[int, tuple[str, list[str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _acceptance.setdefault(number, (title, []))[1].append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, outcomes = _acceptance[number]
        ok = outcomes and all(o == "passed" for o in outcomes)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(scope="session")
def harvard_files():
    return harvard_paths()


@pytest.fixture(scope="session")
def harvard_registry(harvard_files):
    return load_registry(harvard_files["registry"])


@pytest.fixture(scope="session")
def harvard_measurements(harvard_files):
    return read_fixture(harvard_files["measurements"])


@pytest.fixture(scope="session")
def harvard_reference():
    return published()["values"]


@pytest.fixture(scope="session")
def harvard_report(harvard_registry, harvard_measurements, harvard_reference):
    return build_report(harvard_registry, harvard_measurements, ReportOptions(reference=harvard_reference))
