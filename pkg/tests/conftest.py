import numpy as np
import pytest
from hypothesis import settings, strategies as st

from burgers_relax.samples import random_commuting_material, random_material, unit_surrogate

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

SQRT5 = np.sqrt(5.0)
# unit scalar surrogate: exact roots and residues of 1 / D(s)
UNIT_ROOTS = np.array([(-3 + SQRT5) / 2, (-3 - SQRT5) / 2])
UNIT_COEFFS = np.array([(5 - SQRT5) / 10, (5 + SQRT5) / 10])


def unit_G(t):
    t = np.asarray(t, dtype=float)
    return np.where(t < 0, 0.0, UNIT_COEFFS @ np.exp(np.outer(UNIT_ROOTS, np.maximum(t, 0.0))))


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def materials(draw, dim=None, n=None, commuting=False):
    seed = draw(seeds)
    gen = random_commuting_material if commuting else random_material
    return gen(np.random.default_rng(seed), dim=dim, n=n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit2():
    return unit_surrogate(2)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
