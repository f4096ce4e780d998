"""Acceptance gate: every criterion of the full verification suite at its stated tolerance.

Each criterion prints one ``[PASS]``/``[FAIL]`` line (visible with ``-s`` or
in the ``-v`` summary). The Monte Carlo criteria take several minutes in
total on a single core.
"""

import pytest

from eeas import verify


@pytest.mark.parametrize("key, title, check", verify.FULL, ids=[k for k, _, _ in verify.FULL])
def test_criterion(key, title, check, capsys):
    result = verify.run_one(key, title, check)
    with capsys.disabled():
        print("\n" + verify.format_result(result))
    assert result.passed, verify.format_result(result)
