from __future__ import annotations

import pytest
from hypothesis import strategies as st

from mwgame.payoffs import PAYOFF_KEYS, PayoffParameters

# instance shared by most 1:1 and 1:1^n examples
BASE = dict(wpc=2.0, wct=1.0, wba=2.0, mpw=3.0, mca=1.0, mcv=1.0, mbr=5.0)
SETI = dict(wpc=0.0, wct=0.0, wba=1.0, mpw=3.0, mca=1.0, mcv=1.0, mbr=5.0)


@pytest.fixture
def base() -> PayoffParameters:
    return PayoffParameters(**BASE)


@pytest.fixture
def seti() -> PayoffParameters:
    return PayoffParameters(**SETI)


payoff_value = st.floats(min_value=0.0, max_value=20.0, allow_nan=False, allow_infinity=False)
# small integer grid, so tolerance-equality conditions actually fire
payoff_grid = st.integers(min_value=0, max_value=4).map(float)


@st.composite
def payoff_params(draw, values=payoff_value) -> PayoffParameters:
    return PayoffParameters(**{k: draw(values) for k in PAYOFF_KEYS})


probability = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)

# --- acceptance summary --------------------------------------------------------

_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda s: int(s.split("_")[2])):
        verdict = "PASS" if _acceptance[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
