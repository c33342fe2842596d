"""Acceptance gate: every numbered scenario at its stated tolerance.

Each test prints the scenario's one-line report (visible with -s or on
failure) and asserts the pass flag.  The 2D well fixture is computed once
and shared, so the file runs fastest as a whole in definition order.
"""

import pytest

from spectral_eta import acceptance

QUICK = False  # full desk-scale sizes


@pytest.mark.parametrize("criterion", acceptance.CRITERIA,
                         ids=lambda fn: fn.__name__)
def test_acceptance_criterion(criterion):
    report = criterion(QUICK)
    print(report.line())
    assert report.passed, report.line()
