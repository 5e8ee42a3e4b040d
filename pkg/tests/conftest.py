import pytest

from sp1d.config import ScenarioConfig

# criterion label -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture
def base_config():
    return ScenarioConfig()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int(k.rstrip('ab')), k)):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
