import random

import pytest

from hashsig.primitives import FamilyKeys


class DetRandom:
    """Seeded stand-in for os.urandom so failures replay exactly."""

    def __init__(self, seed: int) -> None:
        self.rng = random.Random(seed)

    def __call__(self, count: int) -> bytes:
        return self.rng.randbytes(count)


@pytest.fixture
def rng():
    return DetRandom(20261016)


@pytest.fixture
def family():
    return FamilyKeys.derive(b"test-family")


_CRITERIA = {
    "1": "roundtrip suite",
    "2": "one-time enforcement",
    "3": "published key sizes and dimensioning",
    "4": "Merkle counters",
    "5": "forgery from two signatures",
    "6": "bound calculators",
    "7": "session soundness matrix",
    "8": "streaming/batch equivalence and erasure",
}
_results: dict[str, list[bool]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        number = report.nodeid.split("test_criterion_")[1].split("_")[0]
        _results.setdefault(number, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in _CRITERIA.items():
        runs = _results.get(number)
        if runs is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(runs) else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({title}): {status}")
