import pytest

from uavfso.capacity import NoiseModel, dbm_to_watts
from uavfso.channel import LinkParameters

# criterion id -> list of (label, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def record(criterion: int, label: str, passed: bool, detail: str = ""):
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
    print(f"[criterion {criterion}] {label}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in parts)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}")
        for label, passed, detail in parts:
            tr.write_line(f"    {'pass' if passed else 'FAIL'}  {label}  {detail}")


@pytest.fixture
def link():
    return LinkParameters()


@pytest.fixture
def noise(link):
    return NoiseModel.for_link(link, dbm_to_watts(10.0))
