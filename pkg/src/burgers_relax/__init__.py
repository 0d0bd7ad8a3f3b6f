"""Relaxation tensors of the anisotropic extended Burgers model."""

from .block_operator import (
    BlockMatrix,
    BlockVector,
    BurgersMaterial,
    MaterialError,
    build_A,
    build_Lb,
    quadratic_identity_residual,
    spectral_bounds,
)
from .kernels import BACKEND
from .relax_exp import (
    CertificateError,
    RelaxationEvaluator,
    build_evaluator,
    decay_certificate,
    eval_G,
    eval_G_deriv,
    verify_estimates,
)
from .relax_laplace import PronyForm, build_prony, eval_G_prony
from .tensor_core import ElasticTensor4, SymTensor2, isotropic

__all__ = [
    "BACKEND", "BlockMatrix", "BlockVector", "BurgersMaterial", "CertificateError", "ElasticTensor4",
    "MaterialError", "PronyForm", "RelaxationEvaluator", "SymTensor2", "build_A", "build_Lb",
    "build_evaluator", "build_prony", "decay_certificate", "eval_G", "eval_G_deriv", "eval_G_prony",
    "isotropic", "quadratic_identity_residual", "spectral_bounds", "verify_estimates",
]

__version__ = "0.1.0"
