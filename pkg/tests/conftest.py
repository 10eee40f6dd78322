import pytest

from bubble_bs.analytic import ContractSpec
from bubble_bs.market import BubbleProfile, MarketParams

# criterion lines recorded by test_acceptance, echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def params():
    return MarketParams(r=0.1, alpha=0.2, sigma=0.3)


@pytest.fixture
def call():
    return ContractSpec.call(5.0)


@pytest.fixture
def put():
    return ContractSpec.put(5.0)


@pytest.fixture
def fig1_profile():
    return BubbleProfile.from_triples(1.0, [(0.4, 0.5, 0.285), (0.5, 0.6, 0.3167)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
