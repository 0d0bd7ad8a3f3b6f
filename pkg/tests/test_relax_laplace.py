import io

import numpy as np
import pytest
from hypothesis import given

from burgers_relax.block_operator import BurgersMaterial
from burgers_relax.relax_exp import G_trace, build_evaluator
from burgers_relax.relax_laplace import (
    NonCommutingError, G_trace_prony, build_prony, eval_G_prony, joint_spectral,
    long_time_modulus, no_maxwell_counterexample, partial_fraction_coefficients, read_prony_table,
    reconstruction_residual,
    write_prony_table,
)
from burgers_relax.samples import random_isotropic_material, random_material, unit_surrogate
from burgers_relax.tensor_core import ElasticTensor4, isotropic

from conftest import UNIT_COEFFS, UNIT_ROOTS, materials, unit_G


def test_unit_surrogate_poles_and_coefficients():
    pf = build_prony(unit_surrogate(2))
    assert len(pf.channels) == 1
    ch = pf.channels[0]
    order = np.argsort(ch.roots)
    assert np.allclose(ch.roots[order], np.sort(UNIT_ROOTS), rtol=1e-13)
    coeffs = np.array([c[0] for c in ch.coefficients])[order]
    assert np.allclose(coeffs, UNIT_COEFFS[np.argsort(UNIT_ROOTS)], rtol=1e-12)
    for t in np.linspace(0, 10, 50):
        assert np.allclose(eval_G_prony(pf, t).kelvin_mat, unit_G(t) * np.eye(3), atol=1e-12)


def test_confluent_partial_fractions():
    # (s + 1) / (s + 2)^2 = 1/(s + 2) - 1/(s + 2)^2
    coeffs = partial_fraction_coefficients(np.array([1.0, 1.0]), 1.0, [-2.0], [2])
    assert np.allclose(coeffs[0], [1.0, -1.0])


@given(materials(commuting=True))
def test_methods_agree_for_commuting_materials(m):
    times = np.concatenate([[0.0], np.geomspace(1e-3, 20, 30)])
    a = G_trace(build_evaluator(m), times)
    b = G_trace_prony(build_prony(m), times)
    assert np.linalg.norm(a - b, axis=(1, 2)).max() <= 1e-8 * np.linalg.norm(a, axis=(1, 2)).max()


@pytest.mark.parametrize("seed", range(10))
def test_methods_agree_for_isotropic(seed):
    m = random_isotropic_material(np.random.default_rng(seed))
    times = np.linspace(0, 10, 25)
    assert np.allclose(G_trace(build_evaluator(m), times), G_trace_prony(build_prony(m), times), atol=1e-10)


@given(materials(commuting=True))
def test_poles_real_negative_and_interlaced(m):
    pf = build_prony(m)
    for ch in pf.channels:
        assert np.all(np.isreal(ch.roots)) and np.all(ch.roots < 0)
        assert reconstruction_residual(ch) <= 1e-9
        # one root below the fastest pole -A_l, one between each pair, one above the slowest
        poles = np.sort(-ch.rational.merged().A)
        edges = np.concatenate([[-np.inf], poles, [0.0]])
        assert np.all(np.histogram(np.sort(ch.roots), bins=edges)[0] == 1)


def test_joint_spectral_reconstructs(rng):
    from burgers_relax.samples import random_commuting_material

    m = random_commuting_material(rng, dim=3, n=2)
    js = joint_spectral(m)
    for l, c in enumerate(m.C):
        assert np.allclose(js.reconstruct(l), c.kelvin_mat, atol=1e-12)
    assert np.allclose(sum(js.projections), np.eye(6), atol=1e-12)


def test_non_commuting_rejected():
    m = random_material(np.random.default_rng(0), dim=3, n=1)
    with pytest.raises(NonCommutingError) as err:
        build_prony(m)
    assert err.value.pair == (0, 1) and err.value.residual > 1e-10


def test_coincident_relaxation_rates_merge():
    # two identical Kelvin-Voigt elements behave as one element with doubled 1/eta
    c = isotropic(2, 1, 1)
    twin = BurgersMaterial(2, 1.0, [c, c, c], [1.0, 1.0, 1.0])
    pf = build_prony(twin)
    for ch in pf.channels:
        assert len(ch.roots) == 2
    times = np.linspace(0, 8, 20)
    assert np.allclose(G_trace_prony(pf, times), G_trace(build_evaluator(twin), times), atol=1e-12)


def test_prony_causal():
    pf = build_prony(unit_surrogate(3))
    assert np.all(eval_G_prony(pf, -1e-9).kelvin_mat == 0.0)
    assert np.all(G_trace_prony(pf, [-3.0, -1e-300]) == 0.0)


def test_table_roundtrip():
    m = random_isotropic_material(np.random.default_rng(4), dim=3, n=2)
    pf = build_prony(m)
    buf = io.StringIO()
    write_prony_table(pf, buf)
    back = read_prony_table(io.StringIO(buf.getvalue()))
    times = np.linspace(0, 5, 11)
    assert np.allclose(G_trace_prony(back, times), G_trace_prony(pf, times), rtol=1e-15, atol=0)
    buf2 = io.StringIO()
    write_prony_table(pf, buf2)
    assert buf.getvalue() == buf2.getvalue()


def test_without_maxwell_equilibrium_modulus_is_nonzero():
    c = [isotropic(2, 1, 1)]
    rep = no_maxwell_counterexample(c, [1.0])
    # single Kelvin-Voigt element: limit is C_1 itself
    assert np.allclose(rep.long_time_modulus, c[0].kelvin_mat, atol=1e-8)
    assert not rep.decays_exponentially
    two = [isotropic(2, 1, 1), ElasticTensor4(2, 3 * np.eye(3))]
    lim = long_time_modulus(two, [1.0, 2.0])
    expected = np.linalg.inv(sum(np.linalg.inv(t.kelvin_mat) for t in two))
    assert np.allclose(lim, expected, atol=1e-8)


def test_with_maxwell_equilibrium_modulus_vanishes():
    c0 = isotropic(2, 1, 1)
    lim = long_time_modulus([c0], [1.0], maxwell=(c0, 1.0))
    assert np.linalg.norm(lim) < 1e-8


def test_channel_rational_limits():
    pf = build_prony(unit_surrogate(2))
    rat = pf.channels[0].rational
    # D(s) = 1 + s + s/(s+1); 1/D(s) at s=1 is 2/5
    assert np.isclose(1.0 / rat(1.0), 0.4)
