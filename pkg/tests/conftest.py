import json
from pathlib import Path

import pytest

FROZEN_PATH = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def frozen():
    """Reference values computed by ``tests/oracles/freeze.py``."""
    return json.loads(FROZEN_PATH.read_text(encoding="utf-8"))


ACCEPTANCE_RESULTS = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    """Store a criterion outcome for the end-of-run summary and echo it immediately."""
    ACCEPTANCE_RESULTS[criterion] = (passed, detail)
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int(k.split()[1].rstrip("ab")), k)):
        passed, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
