"""Acceptance criteria, one test each, at the tolerances stated in checks.py.

Every test prints a single ``[PASS]``/``[FAIL]`` line, visible in ``pytest -v``
output. Run this file directly to get just those lines.
"""
import sys

import pytest

from polyfloer import checks


@pytest.mark.parametrize("number", sorted(checks.CRITERIA))
def test_criterion(number, capsys):
    result = checks.run_criterion(number)
    with capsys.disabled():
        print(f"\n{result.line()}")
    assert result.passed, result.details


if __name__ == "__main__":
    results = checks.run_criteria(threads=1)
    for r in results:
        print(r.line())
    sys.exit(0 if all(r.passed for r in results) else 1)
