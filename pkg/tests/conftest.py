import numpy as np
import pytest

from fundeform.fem import mesh_basis
from fundeform.shapes import box, icosphere, random_sphere, tet_ball


@pytest.fixture(scope="session")
def sphere():
    return random_sphere(200, seed=1, noise=0.05)


@pytest.fixture(scope="session")
def sphere_basis(sphere):
    return mesh_basis(sphere, 20)


@pytest.fixture(scope="session")
def ico2():
    return icosphere(2)


@pytest.fixture(scope="session")
def ball():
    return tet_ball(icosphere(1))


@pytest.fixture(scope="session")
def bar():
    return box((2.0, 1.0, 1.0), (8, 4, 4))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance report ------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one acceptance line: ``report(n, passed, detail)``."""
    def _report(n, passed, detail):
        ACCEPTANCE[n] = (bool(passed), detail)
        print(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
