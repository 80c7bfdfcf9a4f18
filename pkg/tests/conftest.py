import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lowfeat.harness.synthetic import generate_planted_dataset  # noqa: E402

_acceptance = []


@pytest.fixture(scope="session")
def planted():
    return generate_planted_dataset(200, 100, 10, 4, seed=7)


@pytest.fixture(scope="session")
def small_planted():
    return generate_planted_dataset(80, 12, 3, 3, seed=3, n_subjects=4)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for name, *rest in report.user_properties:
        if name == "acceptance":
            _acceptance.append((rest[0], report.outcome, report.duration))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("acceptance")
    if marker:
        item.user_properties.append(("acceptance", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _acceptance:
        tag = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{tag}] {name} ({duration:.2f}s)")
