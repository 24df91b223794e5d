"""Every acceptance criterion at its stated tolerance and time budget.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.  The same checks back ``quadmaps selftest``.
"""

import pytest

from conftest import ACCEPTANCE_LINES
from quadmaps.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA],
                         ids=[c[1].replace(" ", "-") for c in CRITERIA])
def test_criterion(number):
    result = run_criterion(number)
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line
