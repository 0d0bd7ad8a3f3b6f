"""Block operators of the extended Burgers model.

State ordering is (psi, phi_1, ..., phi_n), each block a Kelvin vector of
size k = d(d+1)/2; block matrices are stored flat as ((n+1)k, (n+1)k) arrays.

    L_b  generator of d/dt (psi, phi) = L_b (psi, phi) + (e_dot, 0)
    Cbar blockdiag(C_0, ..., C_n),   Dbar = sqrt(Cbar)
    Lbar symmetric, with L_b = Lbar Cbar
    A    Dbar Lbar Dbar  (symmetric negative definite)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor_core import (
    ElasticTensor4,
    SymTensor2,
    TensorError,
    check_admissibility,
    kelvin_size,
    sqrt_spd,
    symmetry_residual,
)

MEMBERSHIP_TOL = 1e-13


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class BurgersMaterial:
    """One Maxwell element (C_0, eta_0) in series with n Kelvin-Voigt elements."""

    dim: int
    rho: float
    C: tuple
    eta: tuple

    def __post_init__(self):
        object.__setattr__(self, "C", tuple(self.C))
        object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        if len(self.C) < 2:
            raise MaterialError("need a Maxwell element and at least one Kelvin-Voigt element (n >= 1)")
        if not self.rho > 0:
            raise MaterialError(f"mass density must be positive, got {self.rho}")
        for c in self.C:
            if not isinstance(c, ElasticTensor4) or c.dim != self.dim:
                raise MaterialError(f"all tensors must be ElasticTensor4 with d={self.dim}")
        report = check_admissibility(self.C, self.eta)
        if not report.passed:
            raise MaterialError(report.summary())

    @property
    def n(self) -> int:
        return len(self.C) - 1

    @property
    def ksize(self) -> int:
        return kelvin_size(self.dim)

    @property
    def inv_eta(self) -> np.ndarray:
        return 1.0 / np.asarray(self.eta)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.array([self.dim, self.n], dtype=np.int64).tobytes())
        h.update(np.array([self.rho, *self.eta], dtype=np.float64).tobytes())
        for c in self.C:
            h.update(np.ascontiguousarray(c.kelvin_mat, dtype=np.float64).tobytes())
        return h.hexdigest()

    def without_maxwell_dashpot(self, eta0: float = np.inf) -> "BurgersMaterial":
        """Copy with a rigid (or stiffened) Maxwell dashpot."""
        return _replace_eta0(self, eta0)


def _replace_eta0(m: BurgersMaterial, eta0: float) -> BurgersMaterial:
    new = object.__new__(BurgersMaterial)
    object.__setattr__(new, "dim", m.dim)
    object.__setattr__(new, "rho", m.rho)
    object.__setattr__(new, "C", m.C)
    object.__setattr__(new, "eta", (float(eta0),) + m.eta[1:])
    return new


class BlockMatrix:
    """(n+1) x (n+1) array of k x k Kelvin blocks, stored flat."""

    def __init__(self, flat: np.ndarray, ksize: int):
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 2 or flat.shape[0] != flat.shape[1] or flat.shape[0] % ksize:
            raise ValueError(f"flat shape {flat.shape} incompatible with block size {ksize}")
        self.flat = flat
        self.ksize = ksize

    @property
    def nblocks(self) -> int:
        return self.flat.shape[0] // self.ksize

    def block(self, i: int, j: int) -> np.ndarray:
        k = self.ksize
        return self.flat[i * k:(i + 1) * k, j * k:(j + 1) * k]

    def symmetry_residual(self) -> float:
        return symmetry_residual(self.flat)

    def is_symmetric(self, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.symmetry_residual() <= tol

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.flat + self.flat.T))[0])

    def is_positive(self, gamma: float = 0.0, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.is_symmetric(tol) and self.min_eigenvalue() > gamma

    def __matmul__(self, other):
        if isinstance(other, BlockMatrix):
            return BlockMatrix(self.flat @ other.flat, self.ksize)
        if isinstance(other, BlockVector):
            return BlockVector(self.flat @ other.flat, self.ksize)
        return NotImplemented

    @classmethod
    def from_blocks(cls, blocks) -> "BlockMatrix":
        return cls(np.block([[np.asarray(b) for b in row] for row in blocks]), np.asarray(blocks[0][0]).shape[0])


class BlockVector:
    """Stacked Kelvin vectors (psi, phi_1, ..., phi_n)."""

    def __init__(self, flat: np.ndarray, ksize: int):
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 1 or flat.size % ksize:
            raise ValueError(f"vector of size {flat.size} incompatible with block size {ksize}")
        self.flat = flat
        self.ksize = ksize

    @classmethod
    def from_blocks(cls, blocks: Sequence[SymTensor2]) -> "BlockVector":
        return cls(np.concatenate([b.kelvin for b in blocks]), blocks[0].kelvin.size)

    @property
    def blocks(self) -> list:
        from .tensor_core import dim_from_kelvin_size

        d = dim_from_kelvin_size(self.ksize)
        return [SymTensor2(d, b) for b in self.flat.reshape(-1, self.ksize)]

    def block(self, i: int) -> np.ndarray:
        return self.flat[i * self.ksize:(i + 1) * self.ksize]

    def inner(self, other: "BlockVector") -> float:
        return float(self.flat @ other.flat)


def _blockdiag(mats) -> np.ndarray:
    k = mats[0].shape[0]
    out = np.zeros((k * len(mats), k * len(mats)))
    for i, m in enumerate(mats):
        out[i * k:(i + 1) * k, i * k:(i + 1) * k] = m
    return out


def build_Lb(m: BurgersMaterial) -> BlockMatrix:
    k, n = m.ksize, m.n
    a = m.inv_eta
    C = [c.kelvin_mat for c in m.C]
    out = np.zeros(((n + 1) * k, (n + 1) * k))
    out[:k, :k] = -a.sum() * C[0]
    for i in range(1, n + 1):
        sl = slice(i * k, (i + 1) * k)
        out[:k, sl] = a[i] * C[i]
        out[sl, :k] = a[i] * C[0]
        out[sl, sl] = -a[i] * C[i]
    return BlockMatrix(out, k)


def build_Cbar(m: BurgersMaterial) -> BlockMatrix:
    return BlockMatrix(_blockdiag([c.kelvin_mat for c in m.C]), m.ksize)


def build_Dbar(m: BurgersMaterial) -> BlockMatrix:
    return BlockMatrix(_blockdiag([sqrt_spd(c).kelvin_mat for c in m.C]), m.ksize)


def build_Lbar(m: BurgersMaterial) -> BlockMatrix:
    k, n = m.ksize, m.n
    a = m.inv_eta
    eye = np.eye(k)
    out = np.zeros(((n + 1) * k, (n + 1) * k))
    out[:k, :k] = -a.sum() * eye
    for i in range(1, n + 1):
        sl = slice(i * k, (i + 1) * k)
        out[:k, sl] = out[sl, :k] = a[i] * eye
        out[sl, sl] = -a[i] * eye
    return BlockMatrix(out, k)


def build_A(m: BurgersMaterial) -> tuple:
    """Return (A, Dbar) with A = Dbar Lbar Dbar, symmetrized against roundoff."""
    dbar = build_Dbar(m)
    lbar = build_Lbar(m)
    a = dbar.flat @ lbar.flat @ dbar.flat
    return BlockMatrix(0.5 * (a + a.T), m.ksize), dbar


def quadratic_identity_residual(m: BurgersMaterial, y: BlockVector) -> float:
    """Relative mismatch of the dissipation identity

        <-(Cbar L_b) Y, Y> = |C_0 psi|^2 / eta_0 + sum_i |C_0 psi - C_i phi_i|^2 / eta_i
    """
    lhs = -float(y.flat @ (build_Cbar(m).flat @ (build_Lb(m).flat @ y.flat)))
    a = m.inv_eta
    c0psi = m.C[0].kelvin_mat @ y.block(0)
    rhs = a[0] * float(c0psi @ c0psi)
    for i in range(1, m.n + 1):
        r = c0psi - m.C[i].kelvin_mat @ y.block(i)
        rhs += a[i] * float(r @ r)
    return abs(lhs - rhs) / (1.0 + abs(lhs))


@dataclass(frozen=True)
class SpectralBounds:
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float

    def __iter__(self):
        return iter((self.alpha1, self.alpha2, self.beta1, self.beta2))


def bounds_from(a_eigs: np.ndarray, dbar: BlockMatrix) -> SpectralBounds:
    neg = -np.asarray(a_eigs)
    if neg.min() <= 0:
        raise TensorError(f"-A is not positive definite (smallest eigenvalue {neg.min():.6g})")
    d = np.linalg.eigvalsh(dbar.flat)
    return SpectralBounds(float(neg.max()), float(neg.min()), float(d[0]), float(d[-1]))


def spectral_bounds(m: BurgersMaterial) -> SpectralBounds:
    """alpha2 I <= -A <= alpha1 I and beta1 I <= Dbar <= beta2 I, as extreme eigenvalues."""
    a, dbar = build_A(m)
    return bounds_from(np.linalg.eigvalsh(a.flat), dbar)
