"""Acceptance suite: every criterion at its pinned tolerance, one pass/fail
line per criterion (pytest -v shows them; each test also prints its detail).
"""

import pytest

from multising.acceptance import CRITERIA


@pytest.mark.parametrize(
    "cid,title,fn", CRITERIA, ids=[f"criterion_{cid}_{t.replace(' ', '_')}" for cid, t, _ in CRITERIA]
)
def test_acceptance_criterion(cid, title, fn):
    ok, detail = fn()
    print(f"{'PASS' if ok else 'FAIL'} criterion {cid}: {title} -- {detail}")
    assert ok, f"criterion {cid} ({title}): {detail}"
