"""The 11 acceptance criteria, run through ``ermconc accept``.

Run directly (``python tests/test_acceptance.py``) or under pytest; either
way one PASS/FAIL line per criterion is printed.
"""

import pytest

from ermconc.cli import RunContext, cmd_accept

from conftest import ACCEPTANCE_LINES

NUMBERS = list(range(1, 12))


@pytest.fixture(scope="module")
def accept_results(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept")
    ctx = RunContext(str(out), 0, 1, "csv")
    results = {r.number: r for r in cmd_accept(ctx, {})}
    return results


@pytest.mark.parametrize("number", NUMBERS)
def test_criterion(accept_results, number):
    res = accept_results[number]
    line = f"{res.line()}  {res.details}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        cmd_accept(RunContext(tmp, 0, 1, "csv"), {})
