"""Acceptance suite: criteria 1-13 on the full profile, 14 via two CLI runs.

Each criterion prints one ``criterion N [PASS|FAIL] name`` line; the lines are
also repeated in pytest's terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""
import subprocess
import sys

import pytest

from poissonlab.verify import CRITERIA, Context, determinism_criterion, run_criterion

LINES = []


@pytest.fixture(scope="module")
def ctx():
    return Context("full")


def _record(c):
    line = c.line()
    LINES.append(line)
    print(line)


@pytest.mark.parametrize("cid", sorted(CRITERIA))
def test_criterion(ctx, cid):
    c = run_criterion(cid, ctx)
    _record(c)
    assert c.passed, f"criterion {cid} failed: {c.measured}"


def _verify_quick(out, cache):
    cmd = [sys.executable, "-m", "poissonlab.cli", "verify", "--profile", "quick",
           "--out", str(out), "--cache", cache]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=900)
    assert proc.returncode == 0, proc.stderr
    return (out / "summary.json").read_bytes()


def test_criterion_14_determinism(tmp_path):
    first = _verify_quick(tmp_path / "a", "off")
    second = _verify_quick(tmp_path / "b", "use")
    c = determinism_criterion(first, second)
    _record(c)
    assert c.passed


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
