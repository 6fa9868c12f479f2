"""
Stabilizing solutions of discrete algebraic Riccati equations.

    P = A'PA + Q - (A'PB + S)(R + B'PB)^-1 (B'PA + S')

The primary solver is the structure-preserving doubling algorithm (SDA);
if it breaks down the Newton (Hewer) iteration takes over, seeded by a
stabilizing gain. The indefinite game equation used for H-infinity
synthesis reuses SDA with R = diag(I, -gamma^2 I).
"""
import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as la

from numerics.linalg import (
    as_matrix,
    check_residual,
    lambda_max_sym,
    relative_residual,
    require_square,
    solve_linear,
    spectral_radius,
    symmetrize,
)
from numerics.lyapunov import solve_dlyap
from numerics.options import DEFAULT_OPTIONS, SolverOptions
from utils.exceptions import (
    DimensionMismatch,
    NoStabilizingSolution,
    NumericsError,
    ResidualTooLarge,
    Singular,
)
from utils.logging_config import create_structured_logger

logger = logging.getLogger(__name__)
solver_log = create_structured_logger(__name__)


def _check_dims(A, B, Q, R, S) -> Tuple[int, int]:
    n = require_square(A, "A")
    if B.shape[0] != n:
        raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
    p = B.shape[1]
    if Q.shape != (n, n):
        raise DimensionMismatch(f"Q must be {n}x{n}, got {Q.shape}")
    if R.shape != (p, p):
        raise DimensionMismatch(f"R must be {p}x{p}, got {R.shape}")
    if S is not None and S.shape != (n, p):
        raise DimensionMismatch(f"S must be {n}x{p}, got {S.shape}")
    return n, p


def dare_gain(A, B, P, R, S=None) -> np.ndarray:
    """Gain K = (R + B'PB)^-1 (B'PA + S') of the DARE solution P"""
    cross = B.T @ P @ A
    if S is not None:
        cross = cross + S.T
    return solve_linear(R + B.T @ P @ B, cross)


def dare_residual(A, B, Q, R, P, S=None) -> float:
    K = dare_gain(A, B, P, R, S)
    rhs = A.T @ P @ A + Q - K.T @ (R + B.T @ P @ B) @ K
    return relative_residual(P - rhs, P, Q)


def _sda(A, G, H, options: SolverOptions) -> Tuple[np.ndarray, int]:
    """
    Doubling iteration for X = H + A'X(I + GX)^-1 A with symmetric G, H.
    Returns the limit of H_k and the number of iterations.
    """
    n = A.shape[0]
    eye = np.eye(n)
    Ak, Gk, Hk = A.copy(), symmetrize(G), symmetrize(H)
    for iteration in range(1, options.max_iterations + 1):
        W = eye + Gk @ Hk
        try:
            WA = la.solve(W, Ak)
            WG = la.solve(W, Gk)
        except la.LinAlgError as e:
            raise NumericsError(f"SDA breakdown at iteration {iteration}: {e}") from e
        H_next = symmetrize(Hk + Ak.T @ Hk @ WA)
        G_next = symmetrize(Gk + Ak @ WG @ Ak.T)
        A_next = Ak @ WA
        if not (np.all(np.isfinite(H_next)) and np.all(np.isfinite(A_next))):
            raise NumericsError(f"SDA produced non-finite iterates at iteration {iteration}")
        change = np.linalg.norm(H_next - Hk)
        Ak, Gk, Hk = A_next, G_next, H_next
        if change <= options.tolerance * max(np.linalg.norm(Hk), 1.0):
            return Hk, iteration
    raise NumericsError("SDA did not converge", {"max_iterations": options.max_iterations})


def _stabilizing_seed(A, B, Q, R) -> np.ndarray:
    if spectral_radius(A) < 1.0:
        return np.zeros((B.shape[1], A.shape[0]))
    try:
        X = la.solve_discrete_are(A, B, Q, R)
    except (ValueError, la.LinAlgError) as e:
        raise NoStabilizingSolution(f"no stabilizing seed gain: {e}") from e
    return dare_gain(A, B, X, R)


def _newton(A, B, Q, R, options: SolverOptions) -> Tuple[np.ndarray, int]:
    K = _stabilizing_seed(A, B, Q, R)
    P = np.zeros_like(A)
    for iteration in range(1, options.max_iterations + 1):
        Acl = A - B @ K
        if spectral_radius(Acl) >= 1.0:
            raise NoStabilizingSolution("Newton iterate lost stability", {"iteration": iteration})
        P_next = symmetrize(solve_dlyap(Acl.T, Q + K.T @ R @ K, options.with_(acceptance=1e-6)))
        K = dare_gain(A, B, P_next, R)
        change = np.linalg.norm(P_next - P)
        P = P_next
        if change <= options.tolerance * max(np.linalg.norm(P), 1.0):
            return P, iteration
    return P, options.max_iterations


def solve_dare(A, B, Q, R, S=None, options: Optional[SolverOptions] = None) -> np.ndarray:
    """
    Stabilizing solution of the discrete algebraic Riccati equation.

    Raises NoStabilizingSolution if neither SDA nor the Newton fallback yields
    a P whose closed loop A - B K is Schur stable.
    """
    options = options or DEFAULT_OPTIONS
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    Q = as_matrix(Q, "Q")
    R = as_matrix(R, "R")
    S = None if S is None else as_matrix(S, "S")
    n, p = _check_dims(A, B, Q, R, S)

    # fold the cross term into an equivalent standard problem
    if S is not None:
        R_inv_St = solve_linear(R, S.T)
        A_std = A - B @ R_inv_St
        Q_std = symmetrize(Q - S @ R_inv_St)
    else:
        A_std, Q_std = A, symmetrize(Q)

    G = symmetrize(B @ solve_linear(R, B.T))
    method = "sda"
    try:
        P, iterations = _sda(A_std, G, Q_std, options)
    except NumericsError as e:
        logger.info(f"SDA failed ({e}); falling back to Newton iteration")
        method = "newton"
        P, iterations = _newton(A_std, B, Q_std, R, options)

    K = dare_gain(A, B, P, R, S)
    rho = spectral_radius(A - B @ K)
    if not np.isfinite(rho) or rho >= 1.0:
        if method == "sda":
            logger.info(f"SDA limit not stabilizing (rho={rho:.4f}); trying Newton iteration")
            method = "newton"
            P, iterations = _newton(A_std, B, Q_std, R, options)
            K = dare_gain(A, B, P, R, S)
            rho = spectral_radius(A - B @ K)
        if rho >= 1.0:
            raise NoStabilizingSolution("closed loop is not Schur stable", {"rho": rho})

    try:
        residual = check_residual("dare", dare_residual(A, B, Q, R, P, S), options)
    except ResidualTooLarge as e:
        raise NoStabilizingSolution(f"DARE solution inaccurate: {e}") from e
    solver_log.log_solver_call(f"dare-{method}", iterations, residual, n=n, p=p, rho=rho)
    return P


def game_gain(A, B_u, B_w, X, gamma: float) -> np.ndarray:
    """Central state-feedback gain -[I 0](R_hat + B'XB)^-1 B'XA of the game equation"""
    p = B_u.shape[1]
    m = B_w.shape[1]
    B = np.hstack([B_u, B_w])
    R_hat = la.block_diag(np.eye(p), -gamma ** 2 * np.eye(m))
    joint = solve_linear(R_hat + B.T @ X @ B, B.T @ X @ A)
    return joint[:p]


def solve_game_dare(A, B_u, B_w, Q, gamma: float,
                    options: Optional[SolverOptions] = None) -> np.ndarray:
    """
    Stabilizing solution of the H-infinity game Riccati equation at level gamma.

    Raises NoStabilizingSolution when gamma is infeasible: SDA breaks down,
    X is not psd, the closed loop is unstable or gamma^2 I - B_w'XB_w is not
    positive definite.
    """
    options = options or DEFAULT_OPTIONS
    A = as_matrix(A, "A")
    B_u = as_matrix(B_u, "B_u")
    B_w = as_matrix(B_w, "B_w")
    Q = as_matrix(Q, "Q")
    if gamma <= 0:
        raise NoStabilizingSolution(f"gamma must be positive, got {gamma}")
    n = require_square(A, "A")

    G = symmetrize(B_u @ B_u.T - (B_w @ B_w.T) / gamma ** 2)
    try:
        X, iterations = _sda(A, G, symmetrize(Q), options)
    except NumericsError as e:
        raise NoStabilizingSolution(f"game Riccati infeasible at gamma={gamma:.6g}: {e}") from e

    if np.linalg.eigvalsh(X)[0] < -1e-9 * max(np.linalg.norm(X), 1.0):
        raise NoStabilizingSolution("game Riccati solution is not psd", {"gamma": gamma})
    margin = gamma ** 2 * np.eye(B_w.shape[1]) - B_w.T @ X @ B_w
    if lambda_max_sym(-margin) >= 0.0:
        raise NoStabilizingSolution("gamma^2 I - B_w'XB_w is not positive definite", {"gamma": gamma})

    B = np.hstack([B_u, B_w])
    R_hat = la.block_diag(np.eye(B_u.shape[1]), -gamma ** 2 * np.eye(B_w.shape[1]))
    try:
        joint = solve_linear(R_hat + B.T @ X @ B, B.T @ X @ A)
    except Singular as e:
        raise NoStabilizingSolution(f"singular game pencil at gamma={gamma:.6g}") from e
    rho = spectral_radius(A - B @ joint)
    if rho >= 1.0:
        raise NoStabilizingSolution("game closed loop is not stable", {"gamma": gamma, "rho": rho})
    rhs = A.T @ X @ A + Q - joint.T @ (R_hat + B.T @ X @ B) @ joint
    residual = relative_residual(X - rhs, X, Q)
    if residual > options.acceptance:
        raise NoStabilizingSolution("game Riccati residual too large",
                                    {"gamma": gamma, "residual": residual})
    logger.debug(f"game dare n={n} gamma={gamma:.6g} iterations={iterations} rho={rho:.4f}")
    return X
