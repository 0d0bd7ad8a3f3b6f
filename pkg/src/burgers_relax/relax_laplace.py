"""Relaxation tensor through the Laplace domain, for commuting spring tensors.

When C_0, ..., C_n commute they share spectral projections P_k, and on each
channel the transform of G is the scalar 1 / D(s; k) with

    D(s; k) = a_0 + s / lam_k0 + sum_i a_i s / (s + a_i lam_ki),   a_i = 1 / eta_i.

Clearing denominators gives a polynomial of degree (number of distinct
poles + 1) whose roots are real and negative; partial fractions of 1/D then
invert term by term into a Prony series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .block_operator import BurgersMaterial
from .tensor_core import (
    DEFAULT_CLUSTER_TOL,
    ElasticTensor4,
    cluster_eigenpairs,
    commute_residual,
    inverse_spd,
)

COMMUTE_TOL = 1e-10
MERGE_TOL = 1e-8
ROOT_MERGE_TOL = 1e-9
COLLISION_TOL = 1e-12
REALNESS_TOL = 1e-9
COND_LIMIT = 1e12


class NonCommutingError(ValueError):
    def __init__(self, pair, residual):
        super().__init__(f"tensors C_{pair[0]} and C_{pair[1]} do not commute (residual {residual:.3g})")
        self.pair = pair
        self.residual = residual


class ConditioningError(ArithmeticError):
    pass


@dataclass(frozen=True)
class JointSpectral:
    projections: tuple
    channel_eigs: np.ndarray  # (n+1, K)

    @property
    def nchannels(self) -> int:
        return len(self.projections)

    def reconstruct(self, l: int) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.channel_eigs[l], self.projections))


def joint_spectral(m: BurgersMaterial, tol: float = COMMUTE_TOL,
                   cluster_tol: float = DEFAULT_CLUSTER_TOL) -> JointSpectral:
    """Common spectral projections of all spring tensors.

    C_0 is diagonalized first; each eigenspace is then split by the
    restrictions of C_1, ..., C_n in turn.
    """
    worst = (0.0, None)
    for i in range(len(m.C)):
        for j in range(i + 1, len(m.C)):
            r = commute_residual(m.C[i], m.C[j])
            if r > worst[0]:
                worst = (r, (i, j))
    if worst[0] > tol:
        raise NonCommutingError(worst[1], worst[0])

    w, v = np.linalg.eigh(m.C[0].kelvin_mat)
    spaces = [basis for _, basis in cluster_eigenpairs(w, v, cluster_tol)]
    for c in m.C[1:]:
        refined = []
        for basis in spaces:
            sub = basis.T @ c.kelvin_mat @ basis
            sw, sv = np.linalg.eigh(0.5 * (sub + sub.T))
            refined.extend(basis @ b for _, b in cluster_eigenpairs(sw, sv, cluster_tol))
        spaces = refined
    projections = tuple(b @ b.T for b in spaces)
    eigs = np.array([
        [np.trace(p @ c.kelvin_mat) / b.shape[1] for p, b in zip(projections, spaces)]
        for c in m.C
    ])
    return JointSpectral(projections, eigs)


@dataclass(frozen=True)
class ChannelRational:
    """D(s) = a0 + b0 s + sum_l a_l s / (s + A_l), with A_l = a_l lam_l."""

    a0: float
    b0: float
    a: np.ndarray
    A: np.ndarray

    def __call__(self, s):
        s = np.asarray(s, dtype=complex if np.iscomplexobj(s) else float)
        out = self.a0 + self.b0 * s
        for al, Al in zip(self.a, self.A):
            out = out + al * s / (s + Al)
        return out

    def merged(self, tol: float = MERGE_TOL) -> "ChannelRational":
        """Combine terms with coincident A_l (within relative ``tol``); weights add."""
        order = np.argsort(self.A)
        a, A = self.a[order], self.A[order]
        groups = []
        for al, Al in zip(a, A):
            if groups and abs(Al - groups[-1][1]) <= tol * max(abs(Al), abs(groups[-1][1])):
                wsum = groups[-1][0] + al
                groups[-1] = (wsum, (groups[-1][0] * groups[-1][1] + al * Al) / wsum, groups[-1][2] + 1)
            else:
                groups.append((al, Al, 1))
        return ChannelRational(self.a0, self.b0, np.array([g[0] for g in groups]),
                               np.array([g[1] for g in groups]))

    def numerator(self) -> np.ndarray:
        """prod_l (s + A_l), ascending coefficients."""
        return P.polyfromroots(-self.A)

    def cleared(self) -> np.ndarray:
        """Q(s) = D(s) prod_l (s + A_l), ascending coefficients."""
        base = self.numerator()
        q = P.polyadd(self.a0 * base, self.b0 * P.polymulx(base))
        for i, (al, Al) in enumerate(zip(self.a, self.A)):
            rest = P.polyfromroots(-np.delete(self.A, i))
            q = P.polyadd(q, al * P.polymulx(rest))
        return q


def channel_rational(js: JointSpectral, eta: Sequence[float], k: int) -> ChannelRational:
    inv = 1.0 / np.asarray(eta, dtype=float)
    lam = js.channel_eigs[:, k]
    return ChannelRational(float(inv[0]), float(1.0 / lam[0]), inv[1:].copy(), inv[1:] * lam[1:])


@dataclass(frozen=True)
class PronyChannel:
    k: int
    roots: np.ndarray
    multiplicities: tuple
    coefficients: tuple  # coefficients[l][q-1] multiplies (s - r_l)^(-q)
    rational: Optional[ChannelRational] = None

    def transform(self, s):
        s = np.asarray(s)
        out = np.zeros(s.shape, dtype=np.result_type(s, float))
        for r, gs in zip(self.roots, self.coefficients):
            for q, g in enumerate(gs, start=1):
                out = out + g / (s - r) ** q
        return out

    def time_function(self, t):
        """Inverse transform: sum g t^(q-1) e^(r t) / (q-1)!, zero for t < 0."""
        t = np.asarray(t, dtype=float)
        tt = np.maximum(t, 0.0)
        out = np.zeros(t.shape)
        for r, gs in zip(self.roots, self.coefficients):
            e = np.exp(r * tt)
            for q, g in enumerate(gs, start=1):
                out = out + g * tt ** (q - 1) * e / math.factorial(q - 1)
        return np.where(t < 0, 0.0, out)


def _companion_roots(coeffs: np.ndarray) -> np.ndarray:
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    deg = c.size - 1
    comp = np.zeros((deg, deg))
    comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(comp)


def channel_poles(rat: ChannelRational, k: int = 0, merge_tol: float = MERGE_TOL,
                  root_tol: float = ROOT_MERGE_TOL) -> PronyChannel:
    """Real negative poles of 1/D(s) with multiplicities (coefficients left empty)."""
    rat = rat.merged(merge_tol)
    raw = _companion_roots(rat.cleared())
    im_bad = np.abs(raw.imag) > REALNESS_TOL * (1.0 + np.abs(raw.real))
    if im_bad.any():
        r = raw[im_bad][0]
        raise ConditioningError(f"channel {k}: non-real root {r:.6g} (conditioning failure)")
    roots = np.sort(raw.real)
    if (roots >= 0).any():
        raise ConditioningError(f"channel {k}: non-negative root {roots.max():.6g}")
    for Al in rat.A:
        if np.min(np.abs(roots + Al)) <= COLLISION_TOL * Al:
            raise ConditioningError(f"channel {k}: root collides with pole -{Al:.6g}")
    merged, mults = [], []
    for r in roots:
        if merged and abs(r - merged[-1]) <= root_tol * max(1.0, abs(r)):
            j = mults[-1]
            merged[-1] = (merged[-1] * j + r) / (j + 1)
            mults[-1] = j + 1
        else:
            merged.append(r)
            mults.append(1)
    return PronyChannel(k, np.array(merged), tuple(mults), (), rat)


def _taylor(coeffs: np.ndarray, x: float, order: int) -> np.ndarray:
    """First ``order`` Taylor coefficients of a polynomial about x."""
    out = np.zeros(order)
    c = np.asarray(coeffs, dtype=float)
    for m in range(order):
        out[m] = P.polyval(x, c) if c.size else 0.0
        c = P.polyder(c) / (m + 1) if c.size > 1 else np.zeros(0)
    return out


def _series_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    for m in range(num.size):
        out[m] = (num[m] - np.dot(out[:m], den[m:0:-1])) / den[0]
    return out


def partial_fraction_coefficients(numerator: np.ndarray, lead: float, roots, mults) -> tuple:
    """Coefficients g[l][q-1] of N(s) / (lead * prod (s - r_l)^j_l) = sum g (s - r_l)^-q.

    Confluent residues: g_{l,q} are Taylor coefficients of (s - r_l)^j F(s)
    at r_l, computed by power-series division.
    """
    roots = np.asarray(roots, dtype=float)
    coeffs = []
    for l, (r, j) in enumerate(zip(roots, mults)):
        den = np.array([lead])
        for i, (ri, ji) in enumerate(zip(roots, mults)):
            if i != l:
                den = P.polymul(den, P.polypow([-ri, 1.0], ji))
        series = _series_divide(_taylor(numerator, r, j), _taylor(den, r, j))
        # series[m] multiplies (s-r)^(m-j)
        coeffs.append(tuple(series[j - q] for q in range(1, j + 1)))
    return tuple(coeffs)


def _lstsq_coefficients(func, roots, mults, samples: np.ndarray):
    cols = []
    for r, j in zip(roots, mults):
        for q in range(1, j + 1):
            cols.append(1.0 / (samples - r) ** q)
    mat = np.column_stack(cols)
    cond = np.linalg.cond(mat)
    if cond > COND_LIMIT:
        raise ConditioningError(
            f"partial-fraction system condition number {cond:.3g} exceeds {COND_LIMIT:.0e}; "
            "increase the pole merge tolerance"
        )
    sol = np.linalg.lstsq(mat, func(samples), rcond=None)[0]
    out, pos = [], 0
    for j in mults:
        out.append(tuple(sol[pos:pos + j]))
        pos += j
    return tuple(out)


SAMPLE_POINTS = np.linspace(0.1, 10.0, 20)


def partial_fractions(channel: PronyChannel, tol: float = 1e-9) -> PronyChannel:
    rat = channel.rational
    coeffs = partial_fraction_coefficients(rat.numerator(), rat.b0, channel.roots, channel.multiplicities)
    out = PronyChannel(channel.k, channel.roots, channel.multiplicities, coeffs, rat)
    if reconstruction_residual(out) > tol:
        coeffs = _lstsq_coefficients(lambda s: 1.0 / rat(s), channel.roots, channel.multiplicities, SAMPLE_POINTS)
        out = PronyChannel(channel.k, channel.roots, channel.multiplicities, coeffs, rat)
        if reconstruction_residual(out) > tol:
            raise ConditioningError(f"channel {channel.k}: partial fractions do not reproduce 1/D(s)")
    return out


def reconstruction_residual(channel: PronyChannel, samples: np.ndarray = SAMPLE_POINTS) -> float:
    direct = 1.0 / channel.rational(samples)
    return float(np.max(np.abs(channel.transform(samples) - direct) / np.abs(direct)))


@dataclass(frozen=True)
class PronyForm:
    dim: int
    joint: JointSpectral
    channels: tuple

    def scalar_functions(self, t) -> np.ndarray:
        """Channel time functions, shape (K,) + shape(t)."""
        return np.array([c.time_function(t) for c in self.channels])


def build_prony(m: BurgersMaterial, tol: float = COMMUTE_TOL) -> PronyForm:
    js = joint_spectral(m, tol)
    channels = tuple(
        partial_fractions(channel_poles(channel_rational(js, m.eta, k), k))
        for k in range(js.nchannels)
    )
    return PronyForm(m.dim, js, channels)


def eval_G_prony(pf: PronyForm, t: float) -> ElasticTensor4:
    if t < 0:
        return ElasticTensor4.zero(pf.dim)
    vals = pf.scalar_functions(float(t))
    return ElasticTensor4(pf.dim, sum(v * p for v, p in zip(vals, pf.joint.projections)))


def G_trace_prony(pf: PronyForm, times) -> np.ndarray:
    vals = pf.scalar_functions(np.asarray(times, dtype=float))  # (K, T)
    return np.einsum("kt,kpq->tpq", vals, np.array(pf.joint.projections))


@dataclass
class NoMaxwellReport:
    long_time_modulus: np.ndarray
    min_eigenvalue: float
    probe_s: float
    decays_exponentially: bool
    message: str


def long_time_modulus(C: Sequence[ElasticTensor4], eta: Sequence[float],
                      maxwell: Optional[tuple] = None, s: float = 1e-9) -> np.ndarray:
    """s * Ghat(s) at small s, i.e. the t -> inf limit of G (final-value theorem).

    Without a Maxwell element, Ghat(s) = s^-1 (sum_i a_i (s I + a_i C_i)^-1)^-1.
    With ``maxwell = (C_0, eta_0)`` the full transform M(s)^-1 is probed.
    """
    k = C[0].kelvin_mat.shape[0]
    eye = np.eye(k)
    a = 1.0 / np.asarray(eta, dtype=float)
    comp = sum(ai * np.linalg.inv(s * eye + ai * c.kelvin_mat) for ai, c in zip(a, C))
    if maxwell is None:
        return np.linalg.inv(comp)
    c0, eta0 = maxwell
    m_s = eye / eta0 + s * inverse_spd(c0).kelvin_mat + s * comp
    return s * np.linalg.inv(m_s)


def no_maxwell_counterexample(C: Sequence[ElasticTensor4], eta: Sequence[float],
                              s: float = 1e-9) -> NoMaxwellReport:
    """Show that a Kelvin-Voigt-only chain has a nonzero equilibrium modulus."""
    lim = long_time_modulus(C, eta, None, s)
    lim = 0.5 * (lim + lim.T)
    mn = float(np.linalg.eigvalsh(lim)[0])
    decays = mn <= 1e-6 * np.linalg.norm(lim)
    msg = ("equilibrium modulus is zero" if decays
           else "equilibrium modulus > 0 => no exponential decay of the relaxation tensor")
    return NoMaxwellReport(lim, mn, s, bool(decays), msg)


def write_prony_table(pf: PronyForm, fh) -> None:
    """Plain-text export; column order is stable."""
    fh.write("# burgers-relax prony table v1\n")
    fh.write(f"# dim={pf.dim} channels={len(pf.channels)}\n")
    fh.write("# channel root multiplicity_index coefficient\n")
    for c in pf.channels:
        for r, gs in zip(c.roots, c.coefficients):
            for q, g in enumerate(gs, start=1):
                fh.write(f"{c.k + 1} {r:.17g} {q} {g:.17g}\n")
    fh.write("# projection channel row values (Kelvin order)\n")
    for k, p in enumerate(pf.joint.projections):
        for i, row in enumerate(p):
            fh.write(f"P {k + 1} {i + 1} " + " ".join(f"{v:.17g}" for v in row) + "\n")


def read_prony_table(fh) -> PronyForm:
    rows, proj = {}, {}
    dim = None
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# dim="):
                dim = int(line.split()[1].split("=")[1])
            continue
        parts = line.split()
        if parts[0] == "P":
            proj.setdefault(int(parts[1]) - 1, []).append([float(v) for v in parts[3:]])
        else:
            k, r, q, g = int(parts[0]) - 1, float(parts[1]), int(parts[2]), float(parts[3])
            rows.setdefault(k, {}).setdefault(r, {})[q] = g
    projections = tuple(np.array(proj[k]) for k in sorted(proj))
    channels = []
    for k in sorted(rows):
        roots = sorted(rows[k])
        coeffs = tuple(tuple(rows[k][r][q] for q in sorted(rows[k][r])) for r in roots)
        channels.append(PronyChannel(k, np.array(roots), tuple(len(c) for c in coeffs), coeffs))
    js = JointSpectral(projections, np.zeros((0, len(projections))))
    return PronyForm(dim, js, tuple(channels))
