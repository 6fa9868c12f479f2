"""
Controller assembly from the factorization, decomposition and Nehari parts.

Reduced feedback form (internal states xi1, xi2 driven by b_t = B_w w_t):

    xi1_{t+1} = A_T xi1_t + b_t
    xi2_{t+1} = F_gamma xi2_t + K_gamma K_M xi1_t + K_hat b_t
    u_t = -K_lqr x_t + Lambda (U xi1_t - Pi xi2_t),   Lambda = Re^-1 B_u'

The raw three-block transfer form stacks the same two internal states with
the LQR closed loop driven directly by w. With a static weight factor the
xi1 block carries nothing and is dropped.
"""
import logging
from dataclasses import dataclass

import numpy as np

from models.lti_system import LtiSystem
from models.realization import ControllerRealization
from numerics.linalg import solve_linear
from pipeline.decomposition import Decomposition
from pipeline.factorizations import DeltaFactor, MFactor
from pipeline.nehari import NehariSolution

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AssembledController:
    reduced: ControllerRealization
    raw: ControllerRealization


def assemble_controller(sys: LtiSystem, delta: DeltaFactor, mfactor: MFactor,
                        decomposition: Decomposition, nehari: NehariSolution,
                        method: str = "cr") -> AssembledController:
    n = sys.n
    A_T = mfactor.realization.A
    Lam = solve_linear(delta.Re, sys.B_u.T)
    U, Pi = decomposition.U, nehari.Pi
    F_g, K_g, K_hat = nehari.F_gamma, nehari.K_gamma, nehari.K_hat
    Dx = -delta.K_lqr
    zeros = np.zeros((n, n))

    if mfactor.is_static:
        Ac, Bc, Cc = F_g, K_hat, -Lam @ Pi
        Ak = np.block([[F_g, zeros],
                       [-sys.B_u @ Lam @ Pi, delta.A_K]])
        Bk = np.vstack([K_g, sys.B_w])
        Ck = np.hstack([-Lam @ Pi, Dx])
    else:
        coupling = K_g @ mfactor.K_M
        Ac = np.block([[A_T, zeros],
                       [coupling, F_g]])
        Bc = np.vstack([np.eye(n), K_hat])
        Cc = Lam @ np.hstack([U, -Pi])
        Ak = np.block([[A_T, zeros, zeros],
                       [coupling, F_g, zeros],
                       [sys.B_u @ Lam @ U, -sys.B_u @ Lam @ Pi, delta.A_K]])
        Bk = np.vstack([sys.B_w, K_g, sys.B_w])
        Ck = np.hstack([Lam @ U, -Lam @ Pi, Dx])

    reduced = ControllerRealization.from_feedback(sys.A, sys.B_u, sys.B_w, Ac, Bc, Cc, Dx, method)
    raw = ControllerRealization.from_transfer(Ak, Bk, Ck, method, p=sys.p, m=sys.m)
    logger.debug(f"assembled {method} controller: {reduced.n_states} internal states, "
                 f"closed-loop rho={reduced.closed_loop_radius():.4f}")
    return AssembledController(reduced, raw)
