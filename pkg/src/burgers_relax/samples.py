"""Random material generators for property suites and benchmarks."""

from __future__ import annotations

import numpy as np
from scipy.stats import ortho_group

from .block_operator import BurgersMaterial
from .tensor_core import ElasticTensor4, isotropic, kelvin_size

EIG_RANGE = (0.5, 3.0)
ETA_RANGE = (0.5, 5.0)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_spd(dim: int, rng, eig_range=EIG_RANGE, basis=None) -> ElasticTensor4:
    """Kelvin matrix Q diag(w) Q^T, with a fresh random Q unless ``basis`` is given."""
    rng = _rng(rng)
    k = kelvin_size(dim)
    q = ortho_group.rvs(k, random_state=rng) if basis is None else basis
    w = rng.uniform(*eig_range, size=k)
    return ElasticTensor4(dim, (q * w) @ q.T)


def _etas(n: int, rng) -> list:
    return list(rng.uniform(*ETA_RANGE, size=n + 1))


def random_material(rng=None, dim=None, n=None, rho: float = 1.0) -> BurgersMaterial:
    """General anisotropic material; dim and n are drawn when not given."""
    rng = _rng(rng)
    dim = dim or int(rng.choice([2, 3]))
    n = n or int(rng.integers(1, 4))
    return BurgersMaterial(dim, rho, [random_spd(dim, rng) for _ in range(n + 1)], _etas(n, rng))


def random_isotropic_material(rng=None, dim=None, n=None, rho: float = 1.0) -> BurgersMaterial:
    rng = _rng(rng)
    dim = dim or int(rng.choice([2, 3]))
    n = n or int(rng.integers(1, 4))
    tensors = []
    for _ in range(n + 1):
        mu = rng.uniform(0.5, 2.0)
        lam = rng.uniform(0.0, 2.0)
        tensors.append(isotropic(dim, lam, mu))
    return BurgersMaterial(dim, rho, tensors, _etas(n, rng))


def random_commuting_material(rng=None, dim=None, n=None, rho: float = 1.0) -> BurgersMaterial:
    """Anisotropic tensors sharing one random orthonormal eigenbasis."""
    rng = _rng(rng)
    dim = dim or int(rng.choice([2, 3]))
    n = n or int(rng.integers(1, 4))
    q = ortho_group.rvs(kelvin_size(dim), random_state=rng)
    return BurgersMaterial(dim, rho, [random_spd(dim, rng, basis=q) for _ in range(n + 1)], _etas(n, rng))


def unit_surrogate(dim: int = 2, n: int = 1) -> BurgersMaterial:
    """All tensors the Kelvin identity and all viscosities 1: a scalar model per channel."""
    return BurgersMaterial(dim, 1.0, [ElasticTensor4.identity(dim)] * (n + 1), [1.0] * (n + 1))


def unit_isotropic(n: int = 1, dim: int = 2) -> BurgersMaterial:
    """Reference FEM material: isotropic lambda = mu = 1, all viscosities 1."""
    return BurgersMaterial(dim, 1.0, [isotropic(dim, 1.0, 1.0)] * (n + 1), [1.0] * (n + 1))
