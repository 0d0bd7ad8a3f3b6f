"""Stress response of a single material point to a prescribed strain history.

Strain is piecewise linear between nodes, so its rate is piecewise constant.
Two independent routes produce the stress:

* ``integrate_internal``: exact exponential steps of the internal-variable
  system in the symmetrized variables U = Dbar (psi, phi),
  dU/dt = A U + Dbar (e_dot, 0, ..., 0);
* ``convolve``: the hereditary integral sigma(t) = int_0^t G(t - s) e_dot(s) ds,
  summed segment by segment in closed form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .block_operator import BurgersMaterial
from .relax_exp import RelaxationEvaluator, build_evaluator
from .tensor_core import kelvin_size


class HistoryError(ValueError):
    pass


@dataclass(frozen=True)
class StrainHistory:
    times: np.ndarray
    values: np.ndarray  # (N, ksize), Kelvin order
    dim: int

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if t.ndim != 1 or t.size < 2:
            raise HistoryError("a strain history needs at least two time nodes")
        if v.shape != (t.size, kelvin_size(self.dim)):
            raise HistoryError(f"strain values must have shape ({t.size}, {kelvin_size(self.dim)}), got {v.shape}")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise HistoryError("times must start at 0 and increase strictly")
        if np.any(v[0] != 0.0):
            raise HistoryError("strain must vanish at t = 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def rates(self) -> np.ndarray:
        """Strain rate on each segment, shape (N-1, ksize)."""
        return np.diff(self.values, axis=0) / np.diff(self.times)[:, None]

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, col, right=np.nan) for col in self.values.T], axis=-1)

    @classmethod
    def ramp(cls, dim: int, direction, t_end: float, nsteps: int) -> "StrainHistory":
        """e(t) = t * direction on a uniform grid."""
        t = np.linspace(0.0, t_end, nsteps + 1)
        return cls(t, np.outer(t, np.asarray(direction, dtype=float)), dim)

    @classmethod
    def smoothed_step(cls, dim: int, amplitude, eps: float, t_end: float, nsteps: int) -> "StrainHistory":
        """e(t) = amplitude * min(t / eps, 1)."""
        t = np.union1d(np.linspace(0.0, t_end, nsteps + 1), [eps])
        return cls(t, np.outer(np.minimum(t / eps, 1.0), np.asarray(amplitude, dtype=float)), dim)


@dataclass
class ResponseTrace:
    times: np.ndarray
    stress: np.ndarray  # (N, ksize)
    psi: np.ndarray     # (N, ksize)
    phi: np.ndarray     # (N, n, ksize)
    phi0: np.ndarray    # (N, ksize)


def _phi_functions(z):
    """(exp(z) - 1) / z and (exp(z) - 1 - z) / z^2, stable near 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    zs = np.where(small, 1.0, z)
    f1 = np.where(small, 1 + z / 2 + z * z / 6, np.expm1(zs) / zs)
    f2 = np.where(small, 0.5 + z / 6 + z * z / 24, (np.expm1(zs) - zs) / (zs * zs))
    return f1, f2


def integrate_internal(m: BurgersMaterial, history: StrainHistory,
                       evaluator: Optional[RelaxationEvaluator] = None,
                       initial: Optional[np.ndarray] = None) -> ResponseTrace:
    """Exact exponential integration of the internal-variable system.

    ``initial`` optionally sets (psi, phi_1..phi_n) at t = 0 as a flat
    array; the default is the unstrained state.
    """
    if history.dim != m.dim:
        raise HistoryError(f"history dimension {history.dim} does not match material {m.dim}")
    ev = evaluator or build_evaluator(m)
    k, n = m.ksize, m.n
    lam, q = ev.eigvals, ev.eigvecs
    dbar = ev.dbar.flat
    h = np.diff(history.times)
    # forcing Dbar (e_dot, 0..0) projected on the eigenbasis
    proj_force = history.rates @ (dbar[:k, :k] @ q[:k, :])
    hl = np.outer(h, lam)
    f1, f2 = _phi_functions(hl)
    decay = np.exp(hl)
    drive = h[:, None] * f1 * proj_force
    u0 = np.zeros((n + 1) * k) if initial is None else dbar @ np.asarray(initial, dtype=float)
    z = kernels.diag_recurrence(decay, drive, q.T @ u0)

    u = z @ q.T
    dinv = np.linalg.inv(dbar)
    y = u @ dinv.T
    sqrt_c0 = dbar[:k, :k]
    stress = u[:, :k] @ sqrt_c0.T
    # phi_0 from int sigma dt: exact integral of the exponential modes per step
    zint = h[:, None] * f1 * z[:-1] + h[:, None] ** 2 * f2 * proj_force
    inc = (zint @ q[:k, :].T) @ sqrt_c0.T / m.eta[0]
    phi0 = np.vstack([np.zeros(k), np.cumsum(inc, axis=0)])
    return ResponseTrace(history.times, stress, y[:, :k], y[:, k:].reshape(-1, n, k), phi0)


def convolve(ev: RelaxationEvaluator, history: StrainHistory, query_times=None) -> np.ndarray:
    """sigma(t) = int_0^t G(t - s) e_dot(s) ds at the history nodes (or ``query_times``).

    Each segment integral of G is closed form through the eigensystem of A.
    """
    b = ev.leading_rows
    lam = ev.eigvals
    rates = history.rates @ b  # (N-1, m)
    if query_times is None:
        w = kernels.hereditary_sum(history.times, lam, rates)
        return w @ b.T
    out = []
    t_nodes = history.times
    for t in np.atleast_1d(np.asarray(query_times, dtype=float)):
        if t <= 0:
            out.append(np.zeros(b.shape[0]))
            continue
        lo = t_nodes[:-1]
        hi = np.minimum(t_nodes[1:], t)
        active = lo < t
        lag_lo = t - lo[active]
        lag_hi = t - hi[active]
        wgt = (np.exp(np.outer(lag_lo, lam)) - np.exp(np.outer(lag_hi, lam))) / lam
        out.append(b @ np.einsum("im,im->m", wgt, rates[active]))
    return np.array(out)


def _exp_trapezoid_weights(b: np.ndarray, h: np.ndarray):
    """Weights of int_0^h exp(-b (h - u)) f(u) du for f linear between end values."""
    bh = np.outer(h, b)
    e = np.exp(-bh)
    full = -np.expm1(-bh) / b                   # int_0^h exp(-b v) dv
    small = bh < 1e-4
    bhs = np.where(small, 1.0, bh)
    # int_0^h v exp(-b v) dv / h, stable near b h = 0
    mom = np.where(small, h[:, None] * (0.5 - bh / 3 + bh * bh / 8),
                   (-np.expm1(-bhs) - bhs * np.exp(-bhs)) / (np.where(small, 1.0, b) ** 2 * h[:, None]))
    w_new = full - mom  # weight of the right end value
    w_old = mom
    return e, w_old, w_new


def memory_integral(c: np.ndarray, a: float, times: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """int_0^t exp(-(t-s) a C) sigma(s) ds at every node, sigma linear between nodes."""
    w, v = np.linalg.eigh(a * c)
    s_eig = sigma @ v
    h = np.diff(times)
    e, w_old, w_new = _exp_trapezoid_weights(w, h)
    drive = w_old * s_eig[:-1] + w_new * s_eig[1:]
    acc = kernels.diag_recurrence(e, drive, np.zeros(w.size))
    return acc @ v.T


def _time_derivative(times: np.ndarray, vals: np.ndarray) -> np.ndarray:
    return np.gradient(vals, times, axis=0, edge_order=2)


def integro_differential_residual(m: BurgersMaterial, times, stress, strain) -> np.ndarray:
    """Pointwise residual of the integro-differential strain-stress relation.

    e_dot - [C_0^-1 sigma_dot + sigma/eta_0
             + sum_i (sigma/eta_i - C_i/eta_i^2 int_0^t exp(-(t-s) C_i/eta_i) sigma(s) ds)]
    with both time derivatives from second-order finite differences.
    """
    times = np.asarray(times, dtype=float)
    stress = np.asarray(stress, dtype=float)
    e_dot = _time_derivative(times, np.asarray(strain, dtype=float))
    s_dot = _time_derivative(times, stress)
    a = m.inv_eta
    c0_inv = np.linalg.inv(m.C[0].kelvin_mat)
    rhs = s_dot @ c0_inv.T + a[0] * stress
    for i in range(1, m.n + 1):
        ci = m.C[i].kelvin_mat
        mem = memory_integral(ci, a[i], times, stress)
        rhs = rhs + a[i] * stress - a[i] ** 2 * mem @ ci.T
    return e_dot - rhs


def verify_integro_differential(m: BurgersMaterial, times, stress, strain) -> float:
    """Max residual norm relative to the largest strain rate."""
    res = integro_differential_residual(m, times, stress, strain)
    scale = np.linalg.norm(_time_derivative(np.asarray(times, float), np.asarray(strain, float)), axis=1).max()
    if scale == 0.0:
        return float(np.linalg.norm(res, axis=1).max())
    return float(np.linalg.norm(res, axis=1).max() / scale)


def kv_strain_closed_form(m: BurgersMaterial, i: int, times, stress) -> np.ndarray:
    """e_i(t) = int_0^t exp(-(t-s) C_i/eta_i) sigma(s) ds / eta_i for sigma linear between nodes."""
    a = m.inv_eta[i]
    return a * memory_integral(m.C[i].kelvin_mat, a, np.asarray(times, float), np.asarray(stress, float))


def read_strain_csv(path, dim: int) -> StrainHistory:
    """Columns t, then Kelvin strain components; an optional header row is skipped."""
    with open(path) as fh:
        first = fh.readline().strip()
    header = bool(first) and not (first[0].isdigit() or first[0] in "+-.#")
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, skiprows=int(header))
    except ValueError as exc:
        raise HistoryError(f"unreadable strain CSV {path}: {exc}") from None
    k = kelvin_size(dim)
    if data.shape[1] != k + 1:
        raise HistoryError(f"strain CSV needs {k + 1} columns (t + Kelvin components), got {data.shape[1]}")
    return StrainHistory(data[:, 0], data[:, 1:], dim)


def kelvin_labels(dim: int) -> list:
    from .tensor_core import KELVIN_INDEX

    return [f"{p + 1}{q + 1}" for p, q in KELVIN_INDEX[dim]]


def write_trace_csv(fh, times, values, prefix: str, dim: int) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t"] + [f"{prefix}{lab}" for lab in kelvin_labels(dim)])
    for t, row in zip(times, values):
        writer.writerow([format(float(t), ".17g")] + [format(float(v), ".17g") for v in row])
