"""Fully symmetric fourth-order tensors in Kelvin (orthonormal Voigt) form.

Component ordering is frozen and shared by every file format in the package:

    d = 3 : (11, 22, 33, 23, 13, 12)
    d = 2 : (11, 22, 12)

Shear components carry a factor sqrt(2), so the Kelvin map is an isometry
between symmetric matrices (Frobenius product) and R^{d(d+1)/2}, and the
Kelvin matrix of a fully symmetric tensor is a symmetric matrix whose
eigenvalues are the tensor eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SQRT2 = np.sqrt(2.0)

KELVIN_INDEX = {
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)),
}

DEFAULT_CLUSTER_TOL = 1e-9
SYMMETRY_TOL = 1e-14


class TensorError(ValueError):
    """Raised for invalid tensor input (dimension, symmetry, definiteness)."""


def kelvin_size(dim: int) -> int:
    if dim not in KELVIN_INDEX:
        raise TensorError(f"dimension must be 2 or 3, got {dim}")
    return dim * (dim + 1) // 2


def kelvin_weights(dim: int) -> np.ndarray:
    return np.array([1.0 if p == q else SQRT2 for p, q in KELVIN_INDEX[dim]])


def dim_from_kelvin_size(size: int) -> int:
    for d in (2, 3):
        if kelvin_size(d) == size:
            return d
    raise TensorError(f"no dimension has Kelvin size {size}")


@dataclass(frozen=True)
class SymTensor2:
    """Symmetric second-order tensor stored as a Kelvin vector."""

    dim: int
    kelvin: np.ndarray

    def __post_init__(self):
        v = np.array(self.kelvin, dtype=float)
        if v.shape != (kelvin_size(self.dim),):
            raise TensorError(
                f"Kelvin vector for d={self.dim} needs length {kelvin_size(self.dim)}, got {v.shape}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "kelvin", v)

    @classmethod
    def from_matrix(cls, mat) -> "SymTensor2":
        mat = np.asarray(mat, dtype=float)
        dim = mat.shape[0]
        if mat.shape != (dim, dim):
            raise TensorError(f"expected a square matrix, got shape {mat.shape}")
        w = kelvin_weights(dim)
        sym = 0.5 * (mat + mat.T)
        return cls(dim, np.array([sym[p, q] for p, q in KELVIN_INDEX[dim]]) * w)

    @classmethod
    def zero(cls, dim: int) -> "SymTensor2":
        return cls(dim, np.zeros(kelvin_size(dim)))

    def to_matrix(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for (p, q), v, w in zip(KELVIN_INDEX[self.dim], self.kelvin, kelvin_weights(self.dim)):
            out[p, q] = out[q, p] = v / w
        return out

    def dot(self, other: "SymTensor2") -> float:
        """Frobenius product of the underlying matrices."""
        return float(self.kelvin @ other.kelvin)

    def norm(self) -> float:
        return float(np.linalg.norm(self.kelvin))


@dataclass(frozen=True)
class ElasticTensor4:
    """Fourth-order tensor with minor symmetries, as a Kelvin matrix.

    Products of non-commuting tensors are not major-symmetric; they are still
    representable and report ``is_symmetric == False``.
    """

    dim: int
    kelvin_mat: np.ndarray
    is_symmetric: bool = field(init=False)

    def __post_init__(self):
        m = np.array(self.kelvin_mat, dtype=float)
        k = kelvin_size(self.dim)
        if m.shape != (k, k):
            raise TensorError(f"Kelvin matrix for d={self.dim} must be {k}x{k}, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "kelvin_mat", m)
        object.__setattr__(self, "is_symmetric", symmetry_residual(m) <= SYMMETRY_TOL)

    @classmethod
    def identity(cls, dim: int) -> "ElasticTensor4":
        return cls(dim, np.eye(kelvin_size(dim)))

    @classmethod
    def zero(cls, dim: int) -> "ElasticTensor4":
        k = kelvin_size(dim)
        return cls(dim, np.zeros((k, k)))

    @classmethod
    def from_dense(cls, c) -> "ElasticTensor4":
        """Kelvin matrix of a dense (d, d, d, d) array with minor symmetries."""
        c = np.asarray(c, dtype=float)
        dim = c.shape[0]
        idx = KELVIN_INDEX.get(dim)
        if idx is None or c.shape != (dim,) * 4:
            raise TensorError(f"expected a (d,d,d,d) array with d in (2,3), got {c.shape}")
        w = kelvin_weights(dim)
        m = np.array([[c[p, q, r, s] for r, s in idx] for p, q in idx])
        return cls(dim, m * np.outer(w, w))

    def to_dense(self) -> np.ndarray:
        d = self.dim
        w = kelvin_weights(d)
        scaled = self.kelvin_mat / np.outer(w, w)
        out = np.zeros((d, d, d, d))
        for a, (p, q) in enumerate(KELVIN_INDEX[d]):
            for b, (r, s) in enumerate(KELVIN_INDEX[d]):
                v = scaled[a, b]
                for i, j in {(p, q), (q, p)}:
                    for k, l in {(r, s), (s, r)}:
                        out[i, j, k, l] = v
        return out

    def eigvals(self) -> np.ndarray:
        """Eigenvalues in descending order (symmetric part for flagged products)."""
        m = self.kelvin_mat
        return np.linalg.eigvalsh(0.5 * (m + m.T))[::-1]

    def __matmul__(self, other):
        if isinstance(other, ElasticTensor4):
            return compose(self, other)
        if isinstance(other, SymTensor2):
            return apply(self, other)
        return NotImplemented

    def __add__(self, other: "ElasticTensor4") -> "ElasticTensor4":
        _check_dims(self, other)
        return ElasticTensor4(self.dim, self.kelvin_mat + other.kelvin_mat)

    def __sub__(self, other: "ElasticTensor4") -> "ElasticTensor4":
        _check_dims(self, other)
        return ElasticTensor4(self.dim, self.kelvin_mat - other.kelvin_mat)

    def __mul__(self, scalar: float) -> "ElasticTensor4":
        return ElasticTensor4(self.dim, float(scalar) * self.kelvin_mat)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SpectralDecomp:
    eigenvalues: tuple
    projections: tuple

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.eigenvalues, self.projections))


@dataclass
class ValidationReport:
    passed: bool
    eta_min: float
    c_min: float
    symmetry_residuals: list
    failures: list

    def summary(self) -> str:
        if self.passed:
            return f"admissible: eta_min={self.eta_min:.6g}, c_min={self.c_min:.6g}"
        return "not admissible: " + "; ".join(self.failures)


def symmetry_residual(m: np.ndarray) -> float:
    scale = np.linalg.norm(m)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(m - m.T) / scale)


def _check_dims(a, b):
    if a.dim != b.dim:
        raise TensorError(f"dimension mismatch: {a.dim} vs {b.dim}")


def isotropic(dim: int, lam: float, mu: float) -> ElasticTensor4:
    """Isotropic tensor lam*I(x)I + 2*mu*Isym in Kelvin form.

    Raises
    ------
    TensorError
        If ``mu <= 0`` or ``dim*lam + 2*mu <= 0`` (not strongly convex).
    """
    k = kelvin_size(dim)
    if mu <= 0 or dim * lam + 2 * mu <= 0:
        raise TensorError(
            f"isotropic tensor with lambda={lam}, mu={mu} is not strongly convex in d={dim}"
        )
    m = 2.0 * mu * np.eye(k)
    m[:dim, :dim] += lam
    return ElasticTensor4(dim, m)


def apply(c: ElasticTensor4, xi: SymTensor2) -> SymTensor2:
    _check_dims(c, xi)
    return SymTensor2(c.dim, c.kelvin_mat @ xi.kelvin)


def compose(c: ElasticTensor4, d: ElasticTensor4) -> ElasticTensor4:
    _check_dims(c, d)
    return ElasticTensor4(c.dim, c.kelvin_mat @ d.kelvin_mat)


def commute_residual(c: ElasticTensor4, d: ElasticTensor4) -> float:
    """||CD - DC||_F / (||C||_F ||D||_F)."""
    _check_dims(c, d)
    a, b = c.kelvin_mat, d.kelvin_mat
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a @ b - b @ a) / denom)


def check_admissibility(c_list: Sequence[ElasticTensor4], eta_list: Sequence[float]) -> ValidationReport:
    """Check positivity of viscosities and full symmetry / strong convexity of tensors."""
    failures = []
    if len(c_list) == 0 or len(c_list) != len(eta_list):
        return ValidationReport(False, float("nan"), float("nan"), [],
                                [f"need equally many tensors and viscosities, got {len(c_list)} and {len(eta_list)}"])
    eta = np.asarray(eta_list, dtype=float)
    eta_min = float(eta.min())
    if not np.all(np.isfinite(eta)) or eta_min <= 0:
        bad = int(np.argmin(eta))
        failures.append(f"(i) viscosity lower bound violated: eta_{bad} = {eta[bad]:g} must be > 0")
    residuals = [symmetry_residual(c.kelvin_mat) for c in c_list]
    mins = []
    for i, (c, r) in enumerate(zip(c_list, residuals)):
        if c.dim != c_list[0].dim:
            failures.append(f"(ii) C_{i} has dimension {c.dim}, expected {c_list[0].dim}")
            mins.append(float("nan"))
            continue
        if r > SYMMETRY_TOL:
            failures.append(f"(ii) C_{i} lacks major symmetry (residual {r:.3g})")
        lam_min = float(np.linalg.eigvalsh(0.5 * (c.kelvin_mat + c.kelvin_mat.T))[0])
        mins.append(lam_min)
        if not lam_min > 0:
            failures.append(f"(iii) C_{i} is not strongly convex (smallest eigenvalue {lam_min:.6g})")
    c_min = float(np.nanmin(mins)) if mins else float("nan")
    return ValidationReport(not failures, eta_min, c_min, residuals, failures)


def _require_spd(c: ElasticTensor4, what: str):
    if not c.is_symmetric:
        raise TensorError(f"{what}: tensor is not major-symmetric")
    w, v = np.linalg.eigh(c.kelvin_mat)
    if w[0] <= 0:
        raise TensorError(f"{what}: tensor is not positive definite (smallest eigenvalue {w[0]:.6g})")
    return w, v


def cluster_eigenpairs(w: np.ndarray, v: np.ndarray, tol: float):
    """Group eigenpairs (descending) whose values agree to relative ``tol``.

    Returns a list of (mean eigenvalue, orthonormal basis columns).
    """
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    scale = max(np.abs(w).max(initial=0.0), np.finfo(float).tiny)
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[start] - w[i] > tol * scale:
            groups.append((float(w[start:i].mean()), v[:, start:i]))
            start = i
    return groups


def spectral(c: ElasticTensor4, tol: float = DEFAULT_CLUSTER_TOL) -> SpectralDecomp:
    w, v = _require_spd(c, "spectral decomposition")
    groups = cluster_eigenpairs(w, v, tol)
    return SpectralDecomp(
        tuple(lam for lam, _ in groups),
        tuple(basis @ basis.T for _, basis in groups),
    )


def sqrt_spd(c: ElasticTensor4) -> ElasticTensor4:
    w, v = _require_spd(c, "square root")
    return ElasticTensor4(c.dim, (v * np.sqrt(w)) @ v.T)


def inverse_spd(c: ElasticTensor4) -> ElasticTensor4:
    w, v = _require_spd(c, "inverse")
    return ElasticTensor4(c.dim, (v / w) @ v.T)


def voigt_to_kelvin(mat) -> np.ndarray:
    """Convert an engineering-Voigt stiffness matrix (shear strains doubled) to Kelvin form."""
    mat = np.asarray(mat, dtype=float)
    dim = dim_from_kelvin_size(mat.shape[0])
    w = kelvin_weights(dim)
    return mat * np.outer(w, w)
