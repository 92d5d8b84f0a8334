import json
from pathlib import Path

import numpy as np
import pytest

from vmscma.constellation import builtin_mc_pool, pool_aipd
from vmscma.factor_graph import default_graph_4x6

DIVERSE_D = (4.70, 4.60, 1.62, 1.25, 1.20, 1.13)


@pytest.fixture(scope="session")
def oracle():
    """Reference values produced by ``oracles/make_oracles.py`` (no package code)."""
    return json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def pool():
    return builtin_mc_pool()


@pytest.fixture(scope="session")
def aipd_table(pool):
    return pool_aipd(pool)


@pytest.fixture(scope="session")
def graph():
    return default_graph_4x6()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, printed as one line per criterion after the run
VERDICTS: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> None:
    VERDICTS[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    outcome = yield
    # a criterion that raised before recording still gets a verdict line
    name = item.name
    if name.startswith("test_criterion_") and outcome.excinfo is not None:
        number = int(name.split("_")[2])
        if number not in VERDICTS:
            exc = outcome.excinfo[1]
            record(number, False, f"{type(exc).__name__}: {exc}")
