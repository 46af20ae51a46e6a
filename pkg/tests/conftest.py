import numpy as np
import pytest
from hypothesis import strategies as st

from jerkcontrol.wrench import ContactGeometry

SYMMETRIC = ContactGeometry(mu_c=1 / 3, mu_z=0.01, fz_min=0.0,
                            x_min=-0.1, x_max=0.1, y_min=-0.05, y_max=0.05)


@pytest.fixture
def sym_geom():
    return SYMMETRIC


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def geometries(draw):
    x0 = draw(st.floats(-0.2, 0.1))
    y0 = draw(st.floats(-0.1, 0.05))
    return ContactGeometry(
        mu_c=draw(st.floats(0.05, 1.5)),
        mu_z=draw(st.floats(0.002, 0.1)),
        fz_min=draw(st.floats(0.0, 50.0)),
        x_min=x0, x_max=x0 + draw(st.floats(0.01, 0.3)),
        y_min=y0, y_max=y0 + draw(st.floats(0.01, 0.2)),
    )


def xis(bound=5.0):
    return st.lists(st.floats(-bound, bound), min_size=6, max_size=6).map(np.array)


# acceptance summary: one line per criterion, printed at the end of the session
ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
