"""Acceptance criteria A1-A10 at their published tolerances.

Each test prints one ``A<n> PASS|FAIL ...`` line; the lines are also collected
into a block at the end of the pytest terminal report (see ``conftest.py``).
Run just this file with ``pytest tests/test_acceptance.py -v -s``.
"""

import os

import pytest

from agglab.acceptance import CRITERIA, run_criteria

THREADS = int(os.environ.get("AGGLAB_THREADS", os.cpu_count() or 1))
LINES = {}


@pytest.mark.slow
@pytest.mark.parametrize("cid", list(CRITERIA))
def test_criterion(cid):
    (res,) = run_criteria([cid], threads=THREADS)
    LINES[cid] = res.line()
    print(res.line())
    assert res.passed, res.line()
