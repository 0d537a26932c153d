"""Weighted Schatten p-norm minimization for low-rank recovery.

Submodules: ``gst`` (scalar shrinkage), ``linalg`` (SVD and the spectral
prox), ``rpca`` (low-rank plus sparse decomposition), ``denoise`` (patch
group image denoising), ``bench`` (synthetic experiments and metrics),
``image`` (I/O) and ``cli``.
"""

from .exceptions import (
    ConvergenceError,
    DimensionError,
    DivergenceError,
    DomainError,
    OrderingError,
    WsnmError,
)
from .gst import gst_objective, gst_solve, gst_threshold
from .linalg import WeightVector, svd, weighted_schatten_norm_p, wsnm_prox
from .rpca import RpcaConfig, nnm_rpca, wsnm_rpca
from .denoise import DenoiseConfig, denoise_image, select_power

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DimensionError", "DivergenceError", "DomainError", "OrderingError",
    "WsnmError", "gst_objective", "gst_solve", "gst_threshold", "WeightVector", "svd",
    "weighted_schatten_norm_p", "wsnm_prox", "RpcaConfig", "nnm_rpca", "wsnm_rpca",
    "DenoiseConfig", "denoise_image", "select_power", "__version__",
]
