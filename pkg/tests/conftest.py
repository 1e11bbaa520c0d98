import functools

import numpy as np
import pytest

from nehari_forge.grid import Disk, Rectangle, build_grid, sample
from nehari_forge.operator import assemble

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

SQUARE = Rectangle(-1.0, 1.0, -1.0, 1.0)
RECT = Rectangle(0.0, 2.0, 0.0, 1.0)
UNIT = Rectangle(0.0, 1.0, 0.0, 1.0)
DISK = Disk(0.0, 0.0, 1.0)


@functools.lru_cache(maxsize=None)
def make_op(domain, n, potential="0", regularization="offset"):
    g = build_grid(domain, n)
    return assemble(g, sample(potential, g, regularization=regularization).values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}")
