"""One pass/fail line per acceptance criterion (shared with `wentzell verify`)."""

import pytest

from wentzell.acceptance import CRITERIA


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{c.number:02d}_{c.title.replace(' ', '_')}"
                                                      for c in CRITERIA])
def test_criterion(criterion):
    result = criterion()
    print(result.line())
    assert result.passed, result.line()
