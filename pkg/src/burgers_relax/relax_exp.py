"""Relaxation tensor from the exponential of the symmetric block operator.

G(t) is the (psi, psi) block of Dbar exp(tA) Dbar for t >= 0 and vanishes
for t < 0. A is symmetric negative definite and small, so one symmetric
eigendecomposition A = Q diag(lam) Q^T serves every time and every
derivative order:

    G^(k)(t) = B diag(lam^k exp(t lam)) B^T,   B = (Dbar Q)[first block rows]
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .block_operator import BlockMatrix, BurgersMaterial, SpectralBounds, bounds_from, build_A
from .tensor_core import ElasticTensor4

FORMAT_VERSION = 1


class CertificateError(RuntimeError):
    """An inequality required for solution decay failed at a grid point."""

    def __init__(self, item: str, t: float, detail: str):
        super().__init__(f"item {item} violated at t={t:.6g}: {detail}")
        self.item = item
        self.t = t


@dataclass(frozen=True)
class RelaxationEvaluator:
    dim: int
    n: int
    dbar: BlockMatrix
    eigvals: np.ndarray
    eigvecs: np.ndarray
    bounds: SpectralBounds
    fingerprint: str = ""
    _lead: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        k = self.dbar.ksize
        object.__setattr__(self, "_lead", (self.dbar.flat @ self.eigvecs)[:k])

    @property
    def ksize(self) -> int:
        return self.dbar.ksize

    @property
    def leading_rows(self) -> np.ndarray:
        """B = (Dbar Q)[:k]; G(t) = B diag(exp(t lam)) B^T."""
        return self._lead

    def block_exponential(self, t: float) -> np.ndarray:
        """Full causal block matrix exp(tA) (zero for t < 0)."""
        q = self.eigvecs
        if t < 0:
            return np.zeros_like(q)
        return (q * np.exp(t * self.eigvals)) @ q.T

    def G(self, t: float) -> ElasticTensor4:
        return eval_G(self, t)


def build_evaluator(m: BurgersMaterial) -> RelaxationEvaluator:
    a, dbar = build_A(m)
    lam, q = np.linalg.eigh(a.flat)
    return RelaxationEvaluator(m.dim, m.n, dbar, lam, q, bounds_from(lam, dbar), m.fingerprint())


def _weighted(ev: RelaxationEvaluator, weights: np.ndarray) -> np.ndarray:
    b = ev.leading_rows
    out = (b * weights) @ b.T
    return 0.5 * (out + out.T)


def eval_G(ev: RelaxationEvaluator, t: float) -> ElasticTensor4:
    if t < 0:
        return ElasticTensor4.zero(ev.dim)
    return ElasticTensor4(ev.dim, _weighted(ev, np.exp(t * ev.eigvals)))


def eval_G_deriv(ev: RelaxationEvaluator, t: float, k: int) -> ElasticTensor4:
    """k-th time derivative of G on [0, inf)."""
    if t < 0 or k < 0:
        raise ValueError("need t >= 0 and k >= 0")
    lam = ev.eigvals
    return ElasticTensor4(ev.dim, _weighted(ev, lam**k * np.exp(t * lam)))


def G_trace(ev: RelaxationEvaluator, times, k: int = 0) -> np.ndarray:
    """Kelvin matrices of G^(k) at many times, shape (len(times), ksize, ksize)."""
    times = np.asarray(times, dtype=float)
    lam = ev.eigvals
    b = ev.leading_rows
    w = lam**k * np.exp(np.outer(np.maximum(times, 0.0), lam))
    w[times < 0] = 0.0
    out = np.einsum("pm,tm,qm->tpq", b, w, b)
    return 0.5 * (out + out.transpose(0, 2, 1))


@dataclass
class EstimateReport:
    passed: bool
    checks: int
    worst_margin: float
    violation: Optional[tuple] = None

    def summary(self) -> str:
        if self.passed:
            return f"{self.checks} derivative bounds hold (worst scaled margin {self.worst_margin:.3g})"
        t, j, side = self.violation
        return f"derivative bound violated at t={t:.6g}, order {j}, {side} side"


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])


def derivative_bounds(ev: RelaxationEvaluator, t: float, k: int, literal_odd: bool = False) -> tuple:
    """Scalar (lower, upper) with lower I <= G^(k)(t) <= upper I.

    G^(k) = B diag(lam^k e^{t lam}) B^T with B B^T = C_0 and lam in
    [-a1, -a2], so |lam|^k e^{-|lam| t} lies between a2^k e^{-a1 t} and
    a1^k e^{-a2 t}. ``literal_odd`` swaps the two exponentials for odd k,
    a transcription that does not hold in general (kept for the
    counterexample test).
    """
    a1, a2, b1, b2 = ev.bounds
    big, small = a1**k * np.exp(-a2 * t), a2**k * np.exp(-a1 * t)
    if k % 2 == 0:
        return b1**2 * small, b2**2 * big
    if literal_odd:
        return -(b2**2) * a1**k * np.exp(-a1 * t), -(b1**2) * a2**k * np.exp(-a2 * t)
    return -(b2**2) * big, -(b1**2) * small


def verify_estimates(ev: RelaxationEvaluator, t_grid, j_max: int, tol: float = 1e-10,
                     literal_odd: bool = False) -> EstimateReport:
    """Check the two-sided exponential bounds on G^(k), k = 0..2*j_max+1.

    Even orders k=2j:  b1^2 a2^k e^{-a1 t} I <= G^(k) <= b2^2 a1^k e^{-a2 t} I
    Odd orders:       -b2^2 a1^k e^{-a2 t} I <= G^(k) <= -b1^2 a2^k e^{-a1 t} I
    Each side holds when the smallest eigenvalue of the difference is
    >= -tol * scale, scale being the largest magnitude involved.
    """
    eye = np.eye(ev.ksize)
    worst = np.inf
    checks = 0
    for t in np.asarray(t_grid, dtype=float):
        for k in range(2 * j_max + 2):
            g = eval_G_deriv(ev, t, k).kelvin_mat
            lo, hi = derivative_bounds(ev, t, k, literal_odd)
            scale = max(abs(lo), abs(hi), np.linalg.norm(g, 2))
            for side, diff in (("lower", g - lo * eye), ("upper", hi * eye - g)):
                margin = _min_eig(diff) / scale
                checks += 1
                worst = min(worst, margin)
                if margin < -tol:
                    return EstimateReport(False, checks, worst, (float(t), k // 2, side))
    return EstimateReport(True, checks, worst)


@dataclass
class DecayCertificate:
    kappa1: float
    kappa2: float
    kappa3: float
    kappa4: float
    kappa4_tilde: float
    kappa5: float
    kappa6: float
    prefactor_lower: float
    prefactor_upper: float
    pure_exponential: bool
    horizon: tuple
    samples: int
    max_residual: float

    def to_dict(self) -> dict:
        return {
            "kappa1": self.kappa1,
            "kappa2": self.kappa2,
            "kappa3": self.kappa3,
            "kappa4": self.kappa4,
            "kappa4_tilde": self.kappa4_tilde,
            "kappa5": self.kappa5,
            "kappa6": self.kappa6,
            "prefactor_lower": self.prefactor_lower,
            "prefactor_upper": self.prefactor_upper,
            "pure_exponential": self.pure_exponential,
            "horizon": list(self.horizon),
            "samples": self.samples,
            "max_residual": self.max_residual,
        }


def decay_certificate(
    ev: RelaxationEvaluator,
    t_grid,
    tol: float = 1e-9,
    derivative: Optional[Callable[[float, int], np.ndarray]] = None,
) -> DecayCertificate:
    """Constants of the exponential-decay hypotheses, verified on ``t_grid``.

    With H = -dG/dt the verified inequalities are

        (ii)  -k1 H <= dH/dt <= -k2 H,  d2H/dt2 <= k3 H,
              |H| + |dH/dt| <= k4 exp(-k4~ t)     (|.| = spectral norm)
        (iii) K = G(0) and H(t) major-symmetric
        (iv)  K and H(t) positive definite
        (v)   b1^2 e^{-k5 T} I <= K - int_0^T H = G(T) <= b2^2 e^{-k6 T} I

    Item (v) is certified with the prefactors b1^2, b2^2; the pure form
    (unit prefactors) is reported in ``pure_exponential`` together with the
    tightest k5, k6 the grid supports.

    ``derivative(t, k)`` overrides the Kelvin matrix of G^(k)(t); used only
    to inject faults in negative-control tests.
    """
    t_grid = np.unique(np.asarray(t_grid, dtype=float))
    a1, a2, b1, b2 = ev.bounds
    if t_grid[0] > 0 or t_grid[0] < 0 or t_grid[-1] < 10.0 / a2:
        raise ValueError(
            f"time grid must cover [0, {10.0 / a2:.6g}], got [{t_grid[0]:.6g}, {t_grid[-1]:.6g}]"
        )
    if derivative is None:
        def derivative(t, k):
            return eval_G_deriv(ev, t, k).kelvin_mat

    k1, k2, k3 = a1, a2, a1**2
    k4, k4t = b2**2 * a1 * (1.0 + a1), a2
    worst = 0.0

    def check(item, t, diff, scale, what):
        nonlocal worst
        margin = _min_eig(diff) / scale
        worst = max(worst, -margin)
        if margin < -tol:
            raise CertificateError(item, t, f"{what} (scaled margin {margin:.3g})")

    k_mat = derivative(0.0, 0)
    if np.linalg.norm(k_mat - k_mat.T) > tol * np.linalg.norm(k_mat):
        raise CertificateError("iii", 0.0, "K is not major-symmetric")
    if _min_eig(k_mat) <= 0:
        raise CertificateError("iv", 0.0, "K is not positive definite")

    lower_rates, upper_rates = [], []
    for t in t_grid:
        h = -derivative(t, 1)
        hd = -derivative(t, 2)
        hdd = -derivative(t, 3)
        g = derivative(t, 0)
        scale = max(np.linalg.norm(h, 2), np.linalg.norm(hd, 2), np.linalg.norm(hdd, 2), np.finfo(float).tiny)
        if np.linalg.norm(h - h.T) > tol * scale:
            raise CertificateError("iii", t, "H is not major-symmetric")
        if _min_eig(h) <= 0:
            raise CertificateError("iv", t, "H is not positive definite")
        check("ii", t, hd + k1 * h, scale, "-k1 H <= dH/dt")
        check("ii", t, -k2 * h - hd, scale, "dH/dt <= -k2 H")
        check("ii", t, k3 * h - hdd, scale * max(1.0, k3), "d2H/dt2 <= k3 H")
        lhs = np.linalg.norm(h, 2) + np.linalg.norm(hd, 2)
        rhs = k4 * np.exp(-k4t * t)
        if lhs > rhs * (1.0 + tol):
            raise CertificateError("ii", t, f"|H|+|dH/dt| = {lhs:.6g} exceeds {rhs:.6g}")
        gscale = max(np.linalg.norm(g, 2), np.finfo(float).tiny)
        eye = np.eye(ev.ksize)
        check("v", t, g - b1**2 * np.exp(-a1 * t) * eye, gscale, "lower exponential bound on G(T)")
        check("v", t, b2**2 * np.exp(-a2 * t) * eye - g, gscale, "upper exponential bound on G(T)")
        if t > 0:
            w = np.linalg.eigvalsh(g)
            lower_rates.append(-np.log(w[0]) / t if w[0] > 0 else np.inf)
            upper_rates.append(-np.log(w[-1]) / t if w[-1] > 0 else np.inf)

    k5 = float(max(lower_rates))
    k6 = float(min(upper_rates))
    g0 = np.linalg.eigvalsh(k_mat)
    # near T = 0 the pure form needs lambda_min(C_0) >= 1 >= lambda_max(C_0)
    pure = bool(np.isfinite(k5) and k6 > 0 and k5 >= k6 and g0[0] >= 1.0 - tol and g0[-1] <= 1.0 + tol)
    return DecayCertificate(
        k1, k2, k3, k4, k4t, k5, k6, b1**2, b2**2, pure,
        (float(t_grid[0]), float(t_grid[-1])), int(t_grid.size), worst,
    )


def cross_check_ode_equivalence(m: BurgersMaterial, history) -> float:
    """Max relative discrepancy between hereditary convolution and internal-variable stress."""
    from .constitutive import convolve, integrate_internal

    ev = build_evaluator(m)
    s_conv = convolve(ev, history)
    s_ode = integrate_internal(m, history, evaluator=ev).stress
    scale = np.linalg.norm(s_conv, axis=1).max()
    if scale == 0.0:
        return float(np.abs(s_ode).max())
    return float(np.linalg.norm(s_conv - s_ode, axis=1).max() / scale)


def save_evaluator(ev: RelaxationEvaluator, path) -> None:
    """Write a portable .npz file (format version, material hash, eigensystem, bounds)."""
    meta = {
        "format": "burgers-relax-evaluator",
        "version": FORMAT_VERSION,
        "dim": ev.dim,
        "n": ev.n,
        "fingerprint": ev.fingerprint,
        "bounds": list(ev.bounds),
    }
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)),
                 dbar=ev.dbar.flat, eigvals=ev.eigvals, eigvecs=ev.eigvecs)


def load_evaluator(path, material: Optional[BurgersMaterial] = None) -> RelaxationEvaluator:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != "burgers-relax-evaluator" or meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported evaluator file: {meta.get('format')} v{meta.get('version')}")
        if material is not None and material.fingerprint() != meta["fingerprint"]:
            raise ValueError("evaluator file was built for a different material")
        from .tensor_core import kelvin_size

        ksize = kelvin_size(meta["dim"])
        return RelaxationEvaluator(
            meta["dim"], meta["n"], BlockMatrix(data["dbar"], ksize),
            data["eigvals"].copy(), data["eigvecs"].copy(),
            SpectralBounds(*meta["bounds"]), meta["fingerprint"],
        )
