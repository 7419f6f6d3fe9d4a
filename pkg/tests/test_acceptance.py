"""The eleven acceptance criteria, one test each.

A pass/fail line per criterion is printed at the end of the pytest run
(see conftest.py) and also when this file is executed directly.
"""
import pytest

from chiralkit import acceptance

RESULTS = {}


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    (res,) = acceptance.run([number], echo=None)
    RESULTS[number] = res
    assert res.passed, res.details


if __name__ == "__main__":
    import sys

    sys.exit(0 if all(r.passed for r in acceptance.run()) else 1)
