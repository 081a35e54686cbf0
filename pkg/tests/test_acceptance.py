"""Acceptance criteria 1-12: one pass/fail line per criterion, printed to the terminal.

Each test asserts the criterion as stated. A failing criterion is reported as a
failure, with its measured value in the printed line.
"""

import pytest

from wkbcover.acceptance import CHECKS, run_check


@pytest.fixture(scope="module")
def exact_cache():
    return {}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CHECKS), ids=lambda k: f"criterion_{k:02d}")
def test_criterion(number, exact_cache, capsys):
    c = run_check(number, exact_cache)
    with capsys.disabled():
        print("\n" + c.line())
    if not c.passed:
        pytest.fail(c.line(), pytrace=False)
