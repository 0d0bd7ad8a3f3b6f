"""Desk-scale P1 finite elements for the viscoelastic initial-boundary value problem.

Unit square, constant-strain triangles, d = 2. Displacement is fixed on the
Dirichlet edges, the rest of the boundary is traction free. Each element
carries its own internal strains (phi_0, ..., phi_n); the stress is
sigma = C_0 psi with psi = e[u] - sum_i phi_i.

Time stepping is Strang splitting:

    internal relaxation (u frozen, exact exponential) for h/2
    wave part (phi frozen, implicit midpoint) for h
    internal relaxation for h/2

The first sub-step is an exact contraction of the internal energy; the
second conserves kinetic + elastic energy exactly. Hence the discrete total
energy never increases.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .block_operator import BurgersMaterial, build_A

SIDES = ("left", "right", "bottom", "top")


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class MeshP1:
    """Structured triangulation of [0,1]^2 with N x N nodes."""

    N: int
    nodes: np.ndarray        # (N*N, 2)
    triangles: np.ndarray    # (E, 3), counter-clockwise
    boundary_edges: np.ndarray  # (Eb, 2)
    edge_tags: tuple         # "D" or "N" per boundary edge
    dirichlet_sides: tuple

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        edges = self.boundary_edges[np.array(self.edge_tags) == "D"]
        return np.unique(edges)

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)


def structured_mesh(N: int, dirichlet: Sequence[str] = ("left",)) -> MeshP1:
    if N < 2:
        raise MeshError("need at least 2 nodes per side")
    dirichlet = tuple(dirichlet)
    if not dirichlet or any(s not in SIDES for s in dirichlet):
        raise MeshError(f"Dirichlet part must be a nonempty subset of {SIDES}, got {dirichlet}")
    x = np.linspace(0.0, 1.0, N)
    xx, yy = np.meshgrid(x, x, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def idx(i, j):
        return j * N + i

    tris = []
    for j in range(N - 1):
        for i in range(N - 1):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    edges, tags = [], []
    sides = {
        "bottom": [(idx(i, 0), idx(i + 1, 0)) for i in range(N - 1)],
        "right": [(idx(N - 1, j), idx(N - 1, j + 1)) for j in range(N - 1)],
        "top": [(idx(i + 1, N - 1), idx(i, N - 1)) for i in range(N - 1)],
        "left": [(idx(0, j + 1), idx(0, j)) for j in range(N - 1)],
    }
    for side in SIDES:
        for e in sides[side]:
            edges.append(e)
            tags.append("D" if side in dirichlet else "N")
    mesh = MeshP1(N, nodes, np.array(tris), np.array(edges), tuple(tags), dirichlet)
    if np.any(mesh.areas() <= 0):
        raise MeshError("degenerate or inverted triangle")
    return mesh


@dataclass
class Operators:
    mesh: MeshP1
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix    # w.r.t. C_0
    strain_op: np.ndarray       # (E, 3, 6) Kelvin strain from element dofs
    dofs: np.ndarray            # (E, 6)
    areas: np.ndarray
    groups: np.ndarray          # material index per element
    materials: tuple
    free: np.ndarray            # free dof indices

    def strain(self, u: np.ndarray) -> np.ndarray:
        """Kelvin strain per element, (E, 3)."""
        return np.einsum("eij,ej->ei", self.strain_op, u[self.dofs])

    def element_force(self, tensors: np.ndarray) -> np.ndarray:
        """Global vector sum_e area_e B_e^T (C_0 t_e)."""
        c0 = np.array([m.C[0].kelvin_mat for m in self.materials])[self.groups]
        stress = np.einsum("eij,ej->ei", c0, tensors)
        local = np.einsum("eji,ej->ei", self.strain_op, stress) * self.areas[:, None]
        out = np.zeros(2 * self.mesh.nodes.shape[0])
        np.add.at(out, self.dofs, local)
        return out


def _strain_operators(mesh: MeshP1):
    p = mesh.nodes[mesh.triangles]
    area = mesh.areas()
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / (2 * area[:, None])
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / (2 * area[:, None])
    ne = len(mesh.triangles)
    B = np.zeros((ne, 3, 6))
    s = np.sqrt(2.0) / 2.0
    for a in range(3):
        B[:, 0, 2 * a] = b[:, a]
        B[:, 1, 2 * a + 1] = c[:, a]
        B[:, 2, 2 * a] = s * c[:, a]
        B[:, 2, 2 * a + 1] = s * b[:, a]
    dofs = np.stack([2 * mesh.triangles, 2 * mesh.triangles + 1], axis=2).reshape(ne, 6)
    return B, dofs, area


def assemble(mesh: MeshP1, materials: Sequence[BurgersMaterial], groups=None, lumped: bool = False) -> Operators:
    """Mass matrix (rho from each material) and C_0-stiffness for P1 triangles."""
    materials = tuple(materials)
    if any(m.dim != 2 for m in materials):
        raise MeshError("the finite element solver is two-dimensional")
    B, dofs, area = _strain_operators(mesh)
    ne = len(mesh.triangles)
    groups = np.zeros(ne, dtype=np.intp) if groups is None else np.asarray(groups, dtype=np.intp)
    rho = np.array([m.rho for m in materials])[groups]
    c0 = np.array([m.C[0].kelvin_mat for m in materials])[groups]
    ke = np.einsum("eki,ekl,elj->eij", B, c0, B) * area[:, None, None]
    if lumped:
        me_scalar = np.repeat((np.eye(3) / 3.0)[None], ne, axis=0)
    else:
        me_scalar = np.repeat(((np.ones((3, 3)) + np.eye(3)) / 12.0)[None], ne, axis=0)
    me = np.zeros((ne, 6, 6))
    me[:, 0::2, 0::2] = me_scalar
    me[:, 1::2, 1::2] = me_scalar
    me *= (rho * area)[:, None, None]
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    ndof = 2 * mesh.nodes.shape[0]
    K = sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(ndof, ndof))
    M = sp.csr_matrix((me.ravel(), (rows, cols)), shape=(ndof, ndof))
    fixed = np.concatenate([2 * mesh.dirichlet_nodes, 2 * mesh.dirichlet_nodes + 1])
    free = np.setdiff1d(np.arange(ndof), fixed)
    return Operators(mesh, M, K, B, dofs, area, groups, materials, free)


@dataclass
class SimState:
    t: float
    u: np.ndarray
    v: np.ndarray
    phi: np.ndarray  # (E, n+1, 3): phi_0, ..., phi_n per element

    def psi(self, ops: Operators) -> np.ndarray:
        return ops.strain(self.u) - self.phi.sum(axis=1)


@dataclass
class EnergyTrace:
    times: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    elastic: list = field(default_factory=list)
    stored: list = field(default_factory=list)

    @property
    def total(self) -> np.ndarray:
        return np.asarray(self.kinetic) + np.asarray(self.elastic) + np.asarray(self.stored)

    def append(self, t, parts):
        self.times.append(t)
        self.kinetic.append(parts[0])
        self.elastic.append(parts[1])
        self.stored.append(parts[2])

    def rows(self):
        return zip(self.times, self.kinetic, self.elastic, self.stored, self.total)


def energy(ops: Operators, state: SimState) -> tuple:
    kin = 0.5 * float(state.v @ (ops.mass @ state.v))
    psi = state.psi(ops)
    mats = ops.materials
    el = 0.0
    st = 0.0
    for g, m in enumerate(mats):
        sel = ops.groups == g
        a = ops.areas[sel]
        el += 0.5 * float(np.einsum("e,ei,ij,ej->", a, psi[sel], m.C[0].kelvin_mat, psi[sel]))
        for i in range(1, m.n + 1):
            ph = state.phi[sel, i]
            st += 0.5 * float(np.einsum("e,ei,ij,ej->", a, ph, m.C[i].kelvin_mat, ph))
    return kin, el, st


def _internal_propagator(m: BurgersMaterial, tau: float) -> np.ndarray:
    """exp(tau L_b) = Dbar^-1 exp(tau A) Dbar on (psi, phi_1..phi_n)."""
    a, dbar = build_A(m)
    lam, q = np.linalg.eigh(a.flat)
    lam = np.minimum(lam, 0.0)
    e = (q * np.exp(tau * lam)) @ q.T
    return np.linalg.solve(dbar.flat, e @ dbar.flat)


class Simulator:
    """Holds the factorized midpoint system and internal propagators for a fixed step."""

    def __init__(self, ops: Operators, h: float, freeze_internal: bool = False):
        self.ops = ops
        self.h = h
        self.freeze_internal = freeze_internal
        f = ops.free
        M = ops.mass[f][:, f].tocsc()
        K = ops.stiffness[f][:, f].tocsc()
        self._M, self._K = M, K
        self._lu = splu((M + (h * h / 4.0) * K).tocsc())
        self._props = np.array([_internal_propagator(m, h / 2.0) for m in ops.materials])
        self.last_residual = 0.0

    def _internal(self, state: SimState) -> SimState:
        if self.freeze_internal:
            return state
        ops = self.ops
        ne = len(ops.groups)
        n = state.phi.shape[1] - 1
        e_u = ops.strain(state.u)
        psi = e_u - state.phi.sum(axis=1)
        y = np.concatenate([psi[:, None, :], state.phi[:, 1:]], axis=1).reshape(ne, -1)
        y_new = kernels.grouped_matvec(ops.groups, self._props, y).reshape(ne, n + 1, 3)
        phi = np.empty_like(state.phi)
        phi[:, 1:] = y_new[:, 1:]
        phi[:, 0] = e_u - y_new[:, 0] - y_new[:, 1:].sum(axis=1)
        return replace(state, phi=phi)

    def _wave(self, state: SimState) -> SimState:
        ops, h, f = self.ops, self.h, self.ops.free
        force = ops.element_force(state.phi.sum(axis=1))[f]
        u0, v0 = state.u[f], state.v[f]
        rhs = self._M @ v0 - (h * h / 4.0) * (self._K @ v0) - h * (self._K @ u0) + h * force
        v1 = self._lu.solve(rhs)
        u1 = u0 + 0.5 * h * (v0 + v1)
        # discrete momentum balance on all free dofs (including traction-free ones)
        res = self._M @ (v1 - v0) / h + self._K @ (0.5 * (u0 + u1)) - force
        scale = max(np.abs(self._M @ (v1 - v0) / h).max(), np.abs(force).max(), np.abs(self._K @ u0).max(), 1e-300)
        self.last_residual = float(np.abs(res).max() / scale)
        u, v = np.zeros_like(state.u), np.zeros_like(state.v)
        u[f], v[f] = u1, v1
        return replace(state, u=u, v=v)

    def step(self, state: SimState) -> SimState:
        s = self._internal(state)
        s = self._wave(s)
        s = self._internal(s)
        return replace(s, t=state.t + self.h)


def step(sim: Simulator, state: SimState) -> SimState:
    return sim.step(state)


def default_initial(mesh: MeshP1, amplitude: float = 0.1):
    """Smooth displacement/velocity fields vanishing on x = 0."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    u = np.zeros(2 * len(x))
    v = np.zeros(2 * len(x))
    u[0::2] = amplitude * np.sin(0.5 * np.pi * x)
    u[1::2] = 0.5 * amplitude * np.sin(0.5 * np.pi * x) * y
    v[1::2] = amplitude * x * (1.0 - 0.5 * y)
    return u, v


def initial_state(ops: Operators, u0=None, v0=None) -> SimState:
    mesh = ops.mesh
    if u0 is None or v0 is None:
        du, dv = default_initial(mesh)
        u0 = du if u0 is None else u0
        v0 = dv if v0 is None else v0
    u0 = np.array(u0, dtype=float)
    v0 = np.array(v0, dtype=float)
    fixed = np.setdiff1d(np.arange(u0.size), ops.free)
    u0[fixed] = 0.0
    v0[fixed] = 0.0
    n = max(m.n for m in ops.materials)
    return SimState(0.0, u0, v0, np.zeros((len(mesh.triangles), n + 1, 3)))


def stable_step(ops: Operators) -> float:
    """h with h*alpha_1 <= 1/2 and h <= dx / (2 c_max)."""
    h = np.inf
    dx = 1.0 / (ops.mesh.N - 1)
    for m in ops.materials:
        a, _ = build_A(m)
        alpha1 = -np.linalg.eigvalsh(a.flat)[0]
        cmax = np.sqrt(np.linalg.eigvalsh(m.C[0].kelvin_mat)[-1] / m.rho)
        h = min(h, 0.5 / alpha1, dx / (2.0 * cmax))
    return float(h)


@dataclass
class DecayConfig:
    N: int = 9
    T: float = 40.0
    h: Optional[float] = None
    dirichlet: tuple = ("left",)
    lumped: bool = False
    freeze_internal: bool = False
    record_every: int = 1
    snapshot_every: int = 0


@dataclass
class DecayResult:
    trace: EnergyTrace
    slope: float
    ratio: float
    monotone: bool
    max_increase: float
    max_dirichlet: float
    max_weak_residual: float
    snapshots: list = field(default_factory=list)


def fit_tail_slope(times, total) -> float:
    """Least-squares slope of log E over [T/2, T]."""
    t = np.asarray(times)
    e = np.asarray(total)
    sel = (t >= 0.5 * t[-1]) & (e > 0)
    if sel.sum() < 2:
        return float("nan")
    return float(np.polyfit(t[sel], np.log(e[sel]), 1)[0])


def run_decay_experiment(materials: Sequence[BurgersMaterial], config: DecayConfig = DecayConfig(),
                         groups=None, u0=None, v0=None) -> DecayResult:
    mesh = structured_mesh(config.N, config.dirichlet)
    ops = assemble(mesh, materials, groups, config.lumped)
    h = config.h or stable_step(ops)
    nsteps = int(np.ceil(config.T / h - 1e-12))
    h = config.T / nsteps
    sim = Simulator(ops, h, config.freeze_internal)
    state = initial_state(ops, u0, v0)
    trace = EnergyTrace()
    trace.append(0.0, energy(ops, state))
    fixed = np.setdiff1d(np.arange(state.u.size), ops.free)
    e_prev = sum(trace.kinetic[0:1] + trace.elastic[0:1] + trace.stored[0:1])
    e0 = e_prev
    max_inc = 0.0
    max_dir = 0.0
    max_res = 0.0
    snaps = []
    for j in range(1, nsteps + 1):
        state = sim.step(state)
        max_res = max(max_res, sim.last_residual)
        max_dir = max(max_dir, float(np.abs(state.u[fixed]).max(initial=0.0)))
        parts = energy(ops, state)
        e_now = sum(parts)
        max_inc = max(max_inc, (e_now - e_prev) / e0)
        e_prev = e_now
        if j % config.record_every == 0 or j == nsteps:
            trace.append(state.t, parts)
        if config.snapshot_every and j % config.snapshot_every == 0:
            snaps.append((state.t, state.u.copy()))
    total = trace.total
    return DecayResult(
        trace, fit_tail_slope(trace.times, total), float(total[-1] / total[0]),
        bool(max_inc <= 1e-10), float(max_inc), max_dir, max_res, snaps,
    )


def run_sweep(material_sets, config: DecayConfig, max_workers: int = 1) -> list:
    """Independent runs, optionally in parallel threads."""
    if max_workers <= 1:
        return [run_decay_experiment(ms, config) for ms in material_sets]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda ms: run_decay_experiment(ms, config), material_sets))
