import numpy as np
import pytest
from hypothesis import given, strategies as st

from burgers_relax import kernels

BACKENDS = [kernels.python_backend] + ([kernels.compiled_backend] if kernels.compiled_backend else [])


def test_compiled_backend_is_active_when_built():
    if kernels.compiled_backend is None:
        pytest.skip("extension not built")
    assert kernels.BACKEND == "cython"
    assert kernels.diag_recurrence is kernels.compiled_backend.diag_recurrence


@pytest.mark.parametrize("be", BACKENDS, ids=lambda b: b.__name__.rsplit(".", 1)[-1])
def test_diag_recurrence_matches_loop(be, rng):
    decay = rng.uniform(0, 1, (30, 4))
    drive = rng.standard_normal((30, 4))
    z0 = rng.standard_normal(4)
    out = be.diag_recurrence(decay, drive, z0)
    z = z0.copy()
    assert np.array_equal(out[0], z0)
    for j in range(30):
        z = decay[j] * z + drive[j]
        assert np.allclose(out[j + 1], z, rtol=1e-15, atol=0)


@pytest.mark.parametrize("be", BACKENDS, ids=lambda b: b.__name__.rsplit(".", 1)[-1])
def test_hereditary_sum_matches_quadrature(be):
    times = np.array([0.0, 0.3, 1.0, 1.7])
    lam = np.array([-0.5, -2.0])
    rates = np.array([[1.0, 2.0], [-1.0, 0.5], [0.25, 0.0]])
    out = be.hereditary_sum(times, lam, rates)
    from scipy.integrate import quad

    for j, tj in enumerate(times):
        for m, l in enumerate(lam):
            rate = lambda s: rates[min(np.searchsorted(times, s, side="right") - 1, 2), m]
            val = sum(quad(lambda s: rate(s) * np.exp(l * (tj - s)), a, b)[0]
                      for a, b in zip(times[:j], times[1:j + 1]))
            assert np.isclose(out[j, m], val, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("be", BACKENDS, ids=lambda b: b.__name__.rsplit(".", 1)[-1])
def test_grouped_matvec(be, rng):
    mats = rng.standard_normal((3, 4, 4))
    group = rng.integers(0, 3, 25)
    vecs = rng.standard_normal((25, 4))
    out = be.grouped_matvec(group, mats, vecs)
    for e in range(25):
        assert np.allclose(out[e], mats[group[e]] @ vecs[e], rtol=1e-14)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")
@given(st.integers(0, 2**31), st.integers(1, 40), st.integers(1, 6))
def test_backends_agree(seed, n, m):
    rng = np.random.default_rng(seed)
    times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.01, 1.0, n))])
    lam = -rng.uniform(0.1, 5.0, m)
    rates = rng.standard_normal((n, m))
    py, cy = kernels.python_backend, kernels.compiled_backend
    assert np.allclose(py.hereditary_sum(times, lam, rates), cy.hereditary_sum(times, lam, rates), rtol=1e-13, atol=1e-14)
    decay = rng.uniform(0, 1, (n, m))
    drive = rng.standard_normal((n, m))
    z0 = rng.standard_normal(m)
    assert np.allclose(py.diag_recurrence(decay, drive, z0), cy.diag_recurrence(decay, drive, z0), rtol=1e-14, atol=0)


def test_pure_env_forces_fallback():
    import subprocess
    import sys

    code = "from burgers_relax import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={"BURGERS_RELAX_PURE": "1", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
