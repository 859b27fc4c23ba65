import pytest

from irsagmac.density_evolution import ErrorProfile
from irsagmac.protocol import IrsaDistribution

# Example 1 protocol: Lambda(x) = 0.5102 x^2 + 0.4898 x^4
EXAMPLE1 = IrsaDistribution.from_pairs([(2, 0.5102), (4, 0.4898)])

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def example1():
    return EXAMPLE1


@pytest.fixture
def pe02():
    return lambda t: ErrorProfile.uniform(t, 0.2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
