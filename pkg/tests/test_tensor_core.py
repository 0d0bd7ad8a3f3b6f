import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from burgers_relax.tensor_core import (
    ElasticTensor4, SymTensor2, TensorError, apply, check_admissibility, cluster_eigenpairs,
    commute_residual, compose, inverse_spd, isotropic, kelvin_size, spectral, sqrt_spd,
    voigt_to_kelvin,
)
from burgers_relax.samples import random_spd

finite = st.floats(-10, 10, allow_nan=False)


def sym_matrices(d):
    return arrays(float, (d, d), elements=finite).map(lambda m: 0.5 * (m + m.T))


@pytest.mark.parametrize("d,k", [(2, 3), (3, 6)])
def test_kelvin_size(d, k):
    assert kelvin_size(d) == k


def test_kelvin_size_rejects_other_dims():
    with pytest.raises(TensorError):
        kelvin_size(4)


def test_shear_components_carry_sqrt2():
    x = SymTensor2.from_matrix([[1.0, 2.0], [2.0, 3.0]])
    assert np.allclose(x.kelvin, [1.0, 3.0, 2.0 * np.sqrt(2.0)])
    y = SymTensor2.from_matrix(np.array([[1, 4, 5], [4, 2, 6], [5, 6, 3]], float))
    assert np.allclose(y.kelvin, [1, 2, 3, 6 * np.sqrt(2), 5 * np.sqrt(2), 4 * np.sqrt(2)])


@pytest.mark.parametrize("d", [2, 3])
@given(data=st.data())
def test_frobenius_product_is_preserved(d, data):
    a = data.draw(sym_matrices(d))
    b = data.draw(sym_matrices(d))
    ka, kb = SymTensor2.from_matrix(a), SymTensor2.from_matrix(b)
    assert np.isclose(ka.dot(kb), np.sum(a * b), rtol=1e-12, atol=1e-10)
    assert np.allclose(ka.to_matrix(), a)


@pytest.mark.parametrize("d", [2, 3])
def test_apply_matches_dense_contraction(d, rng):
    c = random_spd(d, rng)
    dense = c.to_dense()
    for _ in range(20):
        e = rng.standard_normal((d, d))
        e = 0.5 * (e + e.T)
        direct = np.einsum("ijkl,kl->ij", dense, e)
        assert np.allclose(apply(c, SymTensor2.from_matrix(e)).to_matrix(), direct, rtol=1e-12, atol=1e-12)
    assert np.allclose(ElasticTensor4.from_dense(dense).kelvin_mat, c.kelvin_mat, atol=1e-13)


@pytest.mark.parametrize("d", [2, 3])
def test_compose_matches_dense_double_contraction(d, rng):
    c, e = random_spd(d, rng), random_spd(d, rng)
    direct = np.einsum("ijmn,mnkl->ijkl", c.to_dense(), e.to_dense())
    assert np.allclose(compose(c, e).to_dense(), direct, atol=1e-12)


def test_isotropic_eigenvalues():
    c = isotropic(3, 1.0, 1.0)
    w = c.eigvals()
    assert np.isclose(w[0], 3 * 1.0 + 2 * 1.0)
    assert np.allclose(w[1:], 2.0)
    assert np.allclose(isotropic(2, 1.0, 1.0).eigvals(), [4.0, 2.0, 2.0])


@pytest.mark.parametrize("lam,mu", [(1.0, 0.0), (-1.0, 0.4), (0.0, -1.0)])
def test_isotropic_rejects_non_convex(lam, mu):
    with pytest.raises(TensorError):
        isotropic(3, lam, mu)


def test_commute_residual():
    a, b = isotropic(3, 1, 1), isotropic(3, 2, 0.5)
    assert commute_residual(a, b) < 1e-15
    rng = np.random.default_rng(3)
    assert commute_residual(random_spd(3, rng), random_spd(3, rng)) > 1e-3


def test_products_of_non_commuting_tensors_are_flagged(rng):
    a, b = random_spd(2, rng), random_spd(2, rng)
    assert not compose(a, b).is_symmetric
    assert compose(a, a).is_symmetric


def test_admissibility_labels():
    c = isotropic(2, 1, 1)
    assert check_admissibility([c, c], [1.0, 1.0]).passed
    bad = check_admissibility([c, c], [1.0, -1.0])
    assert not bad.passed and bad.failures[0].startswith("(i)")
    neg = ElasticTensor4(2, np.diag([1.0, -1.0, 1.0]))
    assert any(f.startswith("(iii)") for f in check_admissibility([c, neg], [1, 1]).failures)
    asym = ElasticTensor4(2, np.array([[2.0, 0.1, 0], [0, 2, 0], [0, 0, 2]]))
    assert any(f.startswith("(ii)") for f in check_admissibility([c, asym], [1, 1]).failures)


@pytest.mark.parametrize("d", [2, 3])
def test_spectral_reconstructs(d, rng):
    c = random_spd(d, rng)
    sd = spectral(c)
    assert np.allclose(sd.reconstruct(), c.kelvin_mat, atol=1e-12)
    for p in sd.projections:
        assert np.allclose(p @ p, p, atol=1e-12)


def test_spectral_clusters_repeated_eigenvalues():
    sd = spectral(isotropic(3, 1.0, 1.0))
    assert len(sd.eigenvalues) == 2
    assert np.isclose(np.trace(sd.projections[1]), 5.0)


def test_cluster_tolerance():
    w = np.array([1.0, 1.0 + 1e-12, 2.0])
    assert len(cluster_eigenpairs(w, np.eye(3), 1e-9)) == 2
    assert len(cluster_eigenpairs(w, np.eye(3), 1e-14)) == 3


@pytest.mark.parametrize("d", [2, 3])
def test_sqrt_and_inverse(d, rng):
    c = random_spd(d, rng)
    r = sqrt_spd(c).kelvin_mat
    assert np.allclose(r @ r, c.kelvin_mat, atol=1e-12)
    assert np.allclose(inverse_spd(c).kelvin_mat @ c.kelvin_mat, np.eye(kelvin_size(d)), atol=1e-12)


def test_sqrt_rejects_indefinite():
    with pytest.raises(TensorError):
        sqrt_spd(ElasticTensor4(2, np.diag([1.0, -1.0, 1.0])))


def test_voigt_conversion_scales_shear_blocks():
    v = np.ones((3, 3))
    k = voigt_to_kelvin(v)
    assert np.allclose(k, [[1, 1, np.sqrt(2)], [1, 1, np.sqrt(2)], [np.sqrt(2), np.sqrt(2), 2]])
    # isotropic check: Voigt shear modulus mu maps to Kelvin 2 mu
    lam, mu = 1.0, 0.7
    voigt = np.array([[lam + 2 * mu, lam, 0], [lam, lam + 2 * mu, 0], [0, 0, mu]])
    assert np.allclose(voigt_to_kelvin(voigt), isotropic(2, lam, mu).kelvin_mat)


def test_tensors_are_immutable(rng):
    c = random_spd(2, rng)
    with pytest.raises(ValueError):
        c.kelvin_mat[0, 0] = 5.0
