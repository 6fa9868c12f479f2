"""
Dense real-matrix kernels used by the solvers and the synthesis pipeline.

All functions are pure: inputs are never modified and every result is a
fresh array.
"""
import logging
from typing import Tuple

import numpy as np
import scipy.linalg as la

from numerics.options import SolverOptions
from utils.exceptions import (
    DimensionMismatch,
    NotPd,
    NotPsd,
    NumericsError,
    ResidualTooLarge,
    Singular,
)

logger = logging.getLogger(__name__)

# eigenvalues this far below zero (relative to the spectrum scale) are rounding noise
PSD_CLIP = 1e-10


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce scalars, vectors (as columns) and nested lists to a finite float 2-D array"""
    arr = np.array(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim > 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"{name} has non-finite entries")
    return arr


def require_square(X: np.ndarray, name: str) -> int:
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {X.shape}")
    return X.shape[0]


def symmetrize(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def eig_sym(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending"""
    w, V = la.eigh(symmetrize(X))
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


def lambda_max_sym(X: np.ndarray) -> float:
    if X.size == 0:
        return 0.0
    return float(la.eigvalsh(symmetrize(X))[-1])


def psd_sqrt(X: np.ndarray) -> np.ndarray:
    """Unique symmetric psd square root"""
    n = require_square(X, "X")
    if n == 0:
        return np.zeros((0, 0))
    w, V = eig_sym(X)
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    if w[-1] < -PSD_CLIP * scale:
        raise NotPsd("matrix is not positive semidefinite", {"min_eig": float(w[-1])})
    w = np.clip(w, 0.0, None)
    return symmetrize((V * np.sqrt(w)) @ V.T)


def pd_inv_sqrt(X: np.ndarray) -> np.ndarray:
    """Inverse of the symmetric square root of a positive definite matrix"""
    n = require_square(X, "X")
    if n == 0:
        return np.zeros((0, 0))
    w, V = eig_sym(X)
    if w[-1] <= 0.0 or w[-1] <= 1e-14 * abs(w[0]):
        raise NotPd("matrix is not positive definite", {"min_eig": float(w[-1])})
    return symmetrize((V / np.sqrt(w)) @ V.T)


def pd_sqrt(X: np.ndarray) -> np.ndarray:
    """Symmetric square root, requiring positive definiteness"""
    n = require_square(X, "X")
    if n == 0:
        return np.zeros((0, 0))
    w, V = eig_sym(X)
    if w[-1] <= 0.0 or w[-1] <= 1e-14 * abs(w[0]):
        raise NotPd("matrix is not positive definite", {"min_eig": float(w[-1])})
    return symmetrize((V * np.sqrt(w)) @ V.T)


def spectral_radius(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(la.eigvals(A))))


def is_stable(A: np.ndarray, margin: float = 0.0) -> bool:
    return spectral_radius(A) < 1.0 - margin


def sigma_max(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(la.svdvals(M)[0])


def sigma_min(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(la.svdvals(M)[-1])


def solve_linear(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B, raising Singular instead of returning garbage"""
    require_square(A, "A")
    if A.shape[0] == 0:
        return np.zeros((0,) + B.shape[1:])
    if np.linalg.cond(A) > 1.0 / np.finfo(float).eps:
        raise Singular("coefficient matrix is numerically singular",
                       {"cond": float(np.linalg.cond(A))})
    try:
        return la.solve(A, B)
    except la.LinAlgError as e:
        raise Singular(f"linear solve failed: {e}") from e


def invert(A: np.ndarray) -> np.ndarray:
    n = require_square(A, "A")
    return solve_linear(A, np.eye(n))


def lambda_max_pair(Z: np.ndarray, P: np.ndarray) -> float:
    """
    Largest eigenvalue of Z P for symmetric psd Z and P, computed on the
    symmetric form P^{1/2} Z P^{1/2}.
    """
    if Z.shape != P.shape:
        raise DimensionMismatch(f"shape mismatch {Z.shape} vs {P.shape}")
    if Z.size == 0:
        return 0.0
    psd_sqrt(Z)  # NotPsd check on Z as well
    root = psd_sqrt(P)
    value = lambda_max_sym(root @ Z @ root)
    return max(value, 0.0)


def relative_residual(residual: np.ndarray, *scales: np.ndarray) -> float:
    """||residual||_F / max(||scale||_F..., 1)"""
    denom = max([1.0] + [float(np.linalg.norm(s)) for s in scales])
    return float(np.linalg.norm(residual)) / denom


def check_residual(equation: str, value: float, options: SolverOptions) -> float:
    if not np.isfinite(value) or value > options.acceptance:
        raise ResidualTooLarge(f"{equation} residual exceeds acceptance",
                               {"residual": value, "acceptance": options.acceptance})
    if value > options.tolerance:
        logger.warning(f"{equation} residual {value:.3e} above tolerance {options.tolerance:.1e}")
    return value
