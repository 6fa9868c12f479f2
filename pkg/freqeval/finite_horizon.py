"""
Brute-force finite-horizon oracles.

Over a horizon of N steps the operators become block lower-triangular
Toeplitz matrices acting on w_0..w_{N-1}; the cost stacks Q^{1/2} x_1..x_N
and R^{1/2} u_0..u_{N-1}. The clairvoyant benchmark is computed after
pre-stabilizing with the LQR gain (u = -K_lqr x + v), which keeps every
block bounded for unstable plants and leaves the clairvoyant cost unchanged.
"""
import logging
from typing import Sequence

import numpy as np
import scipy.linalg as la

from models.lti_system import LtiSystem, normalize_r
from models.realization import ControllerRealization
from numerics.linalg import pd_sqrt, spectral_radius
from pipeline.factorizations import solve_lqr
from utils.exceptions import UnsupportedController

logger = logging.getLogger(__name__)


def block_toeplitz(taps: Sequence[np.ndarray], horizon: int) -> np.ndarray:
    """Lower-triangular block Toeplitz matrix with block (t, s) = taps[t - s]"""
    rows, cols = taps[0].shape
    out = np.zeros((horizon * rows, horizon * cols))
    for lag in range(horizon):
        tap = taps[lag]
        if not np.any(tap):
            continue
        for s in range(horizon - lag):
            t = s + lag
            out[t * rows:(t + 1) * rows, s * cols:(s + 1) * cols] = tap
    return out


def _powers_times(A: np.ndarray, B: np.ndarray, count: int):
    """[B, A B, A^2 B, ...]"""
    out = [B]
    for _ in range(count - 1):
        out.append(A @ out[-1])
    return out


def controller_cost_operator(sys: LtiSystem, controller: ControllerRealization, horizon: int) -> np.ndarray:
    """
    Stacked [Q^{1/2} x_{1..N}; R^{1/2} u_{0..N-1}] as a matrix acting on w.
    Feedback-form controllers carry the plant state in their transfer form,
    so their closed loop is evaluated without the open-loop plant.
    """
    if not getattr(controller, "realizable", True):
        raise UnsupportedController("the clairvoyant controller has no finite-horizon realization")
    n = sys.n
    q_sqrt, r_sqrt = sys.q_sqrt(), pd_sqrt(sys.R)
    if controller.kind == "feedback":
        A_cl, B_cl = controller.Ak, controller.Bk
        state_out = np.hstack([np.eye(n), np.zeros((n, controller.Ak.shape[0] - n))])
    else:
        nk = controller.Ak.shape[0]
        A_cl = np.block([[sys.A, sys.B_u @ controller.Ck],
                         [np.zeros((nk, n)), controller.Ak]])
        B_cl = np.vstack([sys.B_w, controller.Bk])
        state_out = np.hstack([np.eye(n), np.zeros((n, nk))])
        if spectral_radius(A_cl) >= 1.0:
            logger.warning("open-loop transfer controller on an unstable plant; finite-horizon blocks grow")
    u_out = np.hstack([np.zeros((controller.p, A_cl.shape[0] - controller.Ck.shape[1])), controller.Ck]) \
        if controller.kind != "feedback" else controller.Ck

    # eta_{t+1} = sum_{s<=t} A^{t-s} B w_s; x_{t+1} and u_t are read from eta_{t+1} and eta_t
    eta = _powers_times(A_cl, B_cl, horizon)
    x_taps = [q_sqrt @ state_out @ e for e in eta]
    u_taps = [np.zeros((controller.p, sys.m))] + [r_sqrt @ u_out @ e for e in eta[:-1]]
    return np.vstack([block_toeplitz(x_taps, horizon), block_toeplitz(u_taps, horizon)])


def clairvoyant_gram(sys: LtiSystem, horizon: int) -> np.ndarray:
    """T_0' T_0 = G'(I - F(F'F)^-1 F')G over the horizon"""
    normalized = normalize_r(sys)
    lqr = solve_lqr(normalized)
    A_K, K = lqr.A_K, lqr.K_lqr
    q_sqrt = normalized.q_sqrt()
    p = normalized.p

    def operators(B):
        seq = _powers_times(A_K, B, horizon)
        x_part = block_toeplitz([q_sqrt @ s for s in seq], horizon)
        # x_t seen by the gain at step t is driven by inputs up to t-1
        u_part = -block_toeplitz([np.zeros((p, B.shape[1]))] + [K @ s for s in seq[:-1]], horizon)
        return x_part, u_part

    Fx, Fu = operators(normalized.B_u)
    Fu = Fu + np.eye(horizon * p)
    Gx, Gu = operators(normalized.B_w)
    F = np.vstack([Fx, Fu])
    G = np.vstack([Gx, Gu])
    projected = G - F @ la.solve(F.T @ F, F.T @ G, assume_a="pos")
    gram = G.T @ projected
    return 0.5 * (gram + gram.T)


def finite_horizon_ratio(sys: LtiSystem, controller: ControllerRealization, horizon: int) -> float:
    """Worst-case cost ratio against the clairvoyant benchmark over N steps"""
    T = controller_cost_operator(sys, controller, horizon)
    TT = T.T @ T
    value = float(la.eigh(0.5 * (TT + TT.T), clairvoyant_gram(sys, horizon), eigvals_only=True)[-1])
    logger.debug(f"finite-horizon ratio N={horizon}: {value:.8g}")
    return value


def finite_horizon_regret(sys: LtiSystem, controller: ControllerRealization, horizon: int) -> float:
    """Worst-case cost difference against the clairvoyant benchmark over N steps"""
    T = controller_cost_operator(sys, controller, horizon)
    diff = T.T @ T - clairvoyant_gram(sys, horizon)
    value = float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[-1])
    logger.debug(f"finite-horizon regret N={horizon}: {value:.8g}")
    return value
