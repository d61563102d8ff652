import re
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_SESSION_START = time.perf_counter()
ACCEPTANCE = {}


def record(criterion, passed, detail):
    """Store and print one acceptance verdict line."""
    line = f"CRITERION {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda c: (int(re.match(r"\d+", str(c)).group()), str(c))):
        tr.write_line(ACCEPTANCE[key])
    elapsed = time.perf_counter() - _SESSION_START
    tr.write_line(f"full suite wall-clock: {elapsed:.1f} s "
                  f"({'PASS' if elapsed < 600 else 'FAIL'} against the 10 minute budget)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def full_run_trees(tmp_path_factory):
    """Two full default ``run-paper --seed 42`` output trees, produced through the CLI."""
    from mvarpdc import cli

    root = tmp_path_factory.mktemp("full")
    t0 = time.perf_counter()
    codes = [cli.main(["run-paper", "--seed", "42", "--output-dir", str(root / name)])
             for name in ("a", "b")]
    return root / "a", root / "b", codes, time.perf_counter() - t0
