"""
Discrete Lyapunov (X = A X A' + W) and Stein/Sylvester (U = A U B + C) solvers.

Small problems are solved exactly through the row-major Kronecker identity
vec(A X B) = (A kron B') vec(X); larger ones use Smith doubling.
"""
import logging
from typing import Optional

import numpy as np

from numerics.linalg import (
    check_residual,
    relative_residual,
    require_square,
    solve_linear,
    spectral_radius,
    symmetrize,
)
from numerics.options import DEFAULT_OPTIONS, SolverOptions
from utils.exceptions import DimensionMismatch, NumericsError, UnstableCoefficient, UnstableProduct

logger = logging.getLogger(__name__)

METHODS = ("auto", "kron", "doubling")


def _kron_solve(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    rows, cols = C.shape
    lhs = np.eye(rows * cols) - np.kron(A, B.T)
    vec = solve_linear(lhs, C.reshape(-1))
    return vec.reshape(rows, cols)


def _doubling_solve(A: np.ndarray, B: np.ndarray, C: np.ndarray, options: SolverOptions) -> np.ndarray:
    X = C.copy()
    Ak, Bk = A.copy(), B.copy()
    for iteration in range(1, options.max_iterations + 1):
        step = Ak @ X @ Bk
        X = X + step
        Ak = Ak @ Ak
        Bk = Bk @ Bk
        if np.linalg.norm(step) <= options.tolerance * max(np.linalg.norm(X), 1e-300):
            logger.debug(f"doubling converged after {iteration} squarings")
            return X
        if not np.all(np.isfinite(X)):
            break
    raise NumericsError("doubling iteration did not converge",
                        {"max_iterations": options.max_iterations})


def _pick_method(method: str, order: int, options: SolverOptions) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    if method == "auto":
        return "kron" if order <= options.kron_max_order ** 2 else "doubling"
    return method


def solve_dlyap(A, W, options: Optional[SolverOptions] = None, method: str = "auto") -> np.ndarray:
    """
    Solve X = A X A' + W for stable A.

    Raises UnstableCoefficient when the spectral radius of A is >= 1.
    """
    options = options or DEFAULT_OPTIONS
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    n = require_square(A, "A")
    if W.shape != (n, n):
        raise DimensionMismatch(f"W must be {n}x{n}, got {W.shape}")
    if n == 0:
        return np.zeros((0, 0))

    rho = spectral_radius(A)
    if rho >= 1.0:
        raise UnstableCoefficient("Lyapunov coefficient is not Schur stable", {"rho": rho})

    symmetric = np.allclose(W, W.T, rtol=0.0, atol=1e-14 * max(np.abs(W).max(), 1.0))
    chosen = _pick_method(method, n * n, options)
    if chosen == "kron":
        X = _kron_solve(A, A.T, W)
    else:
        X = _doubling_solve(A, A.T, W, options)
    if symmetric:
        X = symmetrize(X)

    residual = relative_residual(X - A @ X @ A.T - W, X, W)
    check_residual("lyapunov", residual, options)
    logger.debug(f"dlyap n={n} method={chosen} rho={rho:.4f} residual={residual:.2e}")
    return X


def solve_sylvester(A, B, C, options: Optional[SolverOptions] = None, method: str = "auto") -> np.ndarray:
    """
    Solve U = A U B + C.

    Requires rho(A) * rho(B) < 1, otherwise raises UnstableProduct.
    """
    options = options or DEFAULT_OPTIONS
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    na = require_square(A, "A")
    nb = require_square(B, "B")
    if C.shape != (na, nb):
        raise DimensionMismatch(f"C must be {na}x{nb}, got {C.shape}")
    if na == 0 or nb == 0:
        return np.zeros((na, nb))

    product = spectral_radius(A) * spectral_radius(B)
    if product >= 1.0:
        raise UnstableProduct("Sylvester coefficients are not contractive", {"rho_product": product})

    chosen = _pick_method(method, na * nb, options)
    if chosen == "kron":
        U = _kron_solve(A, B, C)
    else:
        U = _doubling_solve(A, B, C, options)

    residual = relative_residual(U - A @ U @ B - C, U, C)
    check_residual("sylvester", residual, options)
    logger.debug(f"sylvester {na}x{nb} method={chosen} residual={residual:.2e}")
    return U
