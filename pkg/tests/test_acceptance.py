"""Acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL line; the lines are repeated together at the
end of the session.
"""

import pytest

from besovkit.acceptance import CRITERIA, run_acceptance


@pytest.mark.parametrize("index,name", [(i, n) for i, n, _ in CRITERIA],
                         ids=[f"{i:02d}-{n}" for i, n, _ in CRITERIA])
def test_criterion(index, name, acceptance_log):
    (res,) = run_acceptance(only=(index,))
    line = f"[{'PASS' if res.passed else 'FAIL'}] {index:2d} {name} ({res.seconds:.1f} s): {res.detail}"
    print(line)
    acceptance_log.append((index, line))
    assert res.passed, res.detail
