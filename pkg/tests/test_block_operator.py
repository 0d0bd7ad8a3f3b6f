import numpy as np
import pytest
from hypothesis import given

from burgers_relax.block_operator import (
    BlockMatrix, BlockVector, BurgersMaterial, MaterialError, build_A, build_Cbar, build_Dbar,
    build_Lb, build_Lbar, quadratic_identity_residual, spectral_bounds,
)
from burgers_relax.samples import unit_surrogate
from burgers_relax.tensor_core import ElasticTensor4, isotropic, sqrt_spd

from conftest import materials


def test_material_validation():
    c = isotropic(2, 1, 1)
    with pytest.raises(MaterialError):
        BurgersMaterial(2, 1.0, [c], [1.0])
    with pytest.raises(MaterialError):
        BurgersMaterial(2, 0.0, [c, c], [1.0, 1.0])
    with pytest.raises(MaterialError, match=r"\(i\)"):
        BurgersMaterial(2, 1.0, [c, c], [1.0, -1.0])
    with pytest.raises(MaterialError):
        BurgersMaterial(2, 1.0, [c, isotropic(3, 1, 1)], [1.0, 1.0])


def test_unit_surrogate_blocks():
    m = unit_surrogate(2)
    lb = build_Lb(m)
    assert np.allclose(lb.block(0, 0), -2 * np.eye(3))
    assert np.allclose(lb.block(0, 1), np.eye(3))
    assert np.allclose(lb.block(1, 0), np.eye(3))
    assert np.allclose(lb.block(1, 1), -np.eye(3))
    a, dbar = build_A(m)
    assert np.allclose(a.flat, lb.flat)
    assert np.allclose(dbar.flat, np.eye(6))


def _dense_Lb(m):
    """Block layout written out entry by entry as an independent oracle."""
    k, n = m.ksize, m.n
    a = 1 / np.array(m.eta)
    rows = []
    for i in range(n + 1):
        row = []
        for j in range(n + 1):
            if i == 0 and j == 0:
                blk = -a.sum() * m.C[0].kelvin_mat
            elif i == 0:
                blk = a[j] * m.C[j].kelvin_mat
            elif j == 0:
                blk = a[i] * m.C[0].kelvin_mat
            elif i == j:
                blk = -a[i] * m.C[i].kelvin_mat
            else:
                blk = np.zeros((k, k))
            row.append(blk)
        rows.append(row)
    return np.block(rows)


@given(materials())
def test_Lb_matches_blockwise_oracle(m):
    assert np.allclose(build_Lb(m).flat, _dense_Lb(m), rtol=0, atol=1e-14 * np.abs(_dense_Lb(m)).max())


@given(materials())
def test_factorizations(m):
    lb, lbar, cbar, dbar = build_Lb(m), build_Lbar(m), build_Cbar(m), build_Dbar(m)
    assert np.linalg.norm(lb.flat - lbar.flat @ cbar.flat) <= 1e-13 * np.linalg.norm(lb.flat)
    assert np.allclose(dbar.flat @ dbar.flat, cbar.flat, atol=1e-12)
    assert lbar.is_symmetric(0.0)


@given(materials())
def test_A_symmetric_negative_definite(m):
    a, _ = build_A(m)
    assert a.is_symmetric()
    assert np.linalg.eigvalsh(a.flat)[-1] < 0
    b = spectral_bounds(m)
    assert b.alpha1 >= b.alpha2 > 0 and b.beta2 >= b.beta1 > 0


@given(materials())
def test_beta_bounds_are_sqrt_of_extreme_tensor_eigenvalues(m):
    b = spectral_bounds(m)
    eigs = np.concatenate([c.eigvals() for c in m.C])
    assert np.isclose(b.beta1**2, eigs.min()) and np.isclose(b.beta2**2, eigs.max())


@given(materials())
def test_quadratic_identity(m):
    rng = np.random.default_rng(len(m.eta))
    for _ in range(5):
        y = BlockVector(rng.standard_normal((m.n + 1) * m.ksize), m.ksize)
        assert quadratic_identity_residual(m, y) <= 1e-12


def test_quadratic_identity_detects_wrong_operator():
    m = unit_surrogate(2, n=2)
    y = BlockVector(np.arange(9.0), 3)
    assert quadratic_identity_residual(m, y) <= 1e-14
    # perturbing a viscosity on one side only must break the identity
    from burgers_relax import block_operator as bo

    orig = bo.build_Lb
    try:
        bo.build_Lb = lambda mm: BlockMatrix(orig(mm).flat * 1.01, mm.ksize)
        assert bo.quadratic_identity_residual(m, y) > 1e-4
    finally:
        bo.build_Lb = orig


def test_block_vector_roundtrip():
    v = BlockVector(np.arange(6.0), 3)
    blocks = v.blocks
    assert len(blocks) == 2 and np.allclose(BlockVector.from_blocks(blocks).flat, v.flat)


def test_block_matrix_shape_checks():
    with pytest.raises(ValueError):
        BlockMatrix(np.zeros((5, 5)), 3)
    with pytest.raises(ValueError):
        BlockVector(np.zeros(5), 3)


def test_fingerprint_changes_with_data():
    m = unit_surrogate(2)
    m2 = BurgersMaterial(2, 1.0, m.C, [1.0, 2.0])
    assert m.fingerprint() == unit_surrogate(2).fingerprint()
    assert m.fingerprint() != m2.fingerprint()


def test_Dbar_is_blockwise_sqrt():
    c = ElasticTensor4(2, np.diag([4.0, 9.0, 1.0]))
    m = BurgersMaterial(2, 1.0, [c, isotropic(2, 1, 1)], [1, 1])
    d = build_Dbar(m)
    assert np.allclose(d.block(0, 0), np.diag([2.0, 3.0, 1.0]))
    assert np.allclose(d.block(1, 1), sqrt_spd(isotropic(2, 1, 1)).kelvin_mat)
    assert np.allclose(d.block(0, 1), 0)
