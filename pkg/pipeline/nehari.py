"""
Best strictly causal approximation of the anticausal part A(z).

The optimal level gamma^2 = lambda_max(Z_1 Pi) is the squared Hankel norm,
with the Gramians

    Pi  = A_K' Pi A_K + G_r G_r'
    Z_1 = A_K Z_1 A_K' + B_u Re^-1 B_u'

and the approximant K'(z) = -H Pi (zI - F_gamma)^-1 K_tilde leaves an
all-pass error K' - A of level gamma.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.lti_system import LtiSystem
from models.realization import TransferRealization
from numerics.linalg import (
    lambda_max_pair,
    pd_sqrt,
    sigma_max,
    solve_linear,
    spectral_radius,
    symmetrize,
)
from numerics.lyapunov import solve_dlyap
from numerics.options import DEFAULT_OPTIONS, SolverOptions
from pipeline.decomposition import Decomposition
from pipeline.factorizations import DeltaFactor, MFactor
from utils.exceptions import DegenerateHankel, UnstableProduct

logger = logging.getLogger(__name__)

# gamma^2 below this fraction of ||Z_1|| ||Pi|| is treated as zero
DEGENERATE_TOL = 1e-13


@dataclass(frozen=True)
class NehariSolution:
    value: float          # gamma^2
    approximant: TransferRealization
    Z_1: np.ndarray
    Z_star: np.ndarray
    Pi: np.ndarray
    K_tilde: np.ndarray   # N^-1 A_K Z_* G_r
    K_gamma: np.ndarray   # K_tilde R_M^{1/2}
    K_hat: np.ndarray     # N^-1 A_K Z_* (P - A_K'U), K_gamma = K_hat B_w
    F_gamma: np.ndarray
    degenerate: bool = False

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.value))


def nehari_solve(sys: LtiSystem, delta: DeltaFactor, decomposition: Decomposition,
                 mfactor: MFactor, Pi: Optional[np.ndarray] = None,
                 Z_1: Optional[np.ndarray] = None,
                 options: Optional[SolverOptions] = None) -> NehariSolution:
    """
    Pi and Z_1 may be supplied when they are already known in closed form
    (square B_w, or Z_1 from the Nabla factor).
    """
    options = options or DEFAULT_OPTIONS
    a = delta.A_K
    n, m = sys.n, sys.m
    G_r = decomposition.G_r
    if Pi is None:
        Pi = solve_dlyap(a.T, G_r @ G_r.T, options)
    if Z_1 is None:
        Z_1 = solve_dlyap(a, sys.B_u @ solve_linear(delta.Re, sys.B_u.T), options)
    Pi, Z_1 = symmetrize(Pi), symmetrize(Z_1)

    value = lambda_max_pair(Z_1, Pi)
    if not np.isfinite(value):
        raise DegenerateHankel("Hankel value is not finite", {"value": value})
    scale = max(np.linalg.norm(Z_1) * np.linalg.norm(Pi), np.finfo(float).tiny)
    p = sys.p

    if value <= DEGENERATE_TOL * scale:
        logger.info(f"{sys.name}: Hankel value {value:.3e} is zero, causal part is optimal")
        approximant = TransferRealization.zero(p, m)
        zeros_nm = np.zeros((n, m))
        return NehariSolution(0.0, approximant, Z_1, np.zeros((n, n)), Pi, zeros_nm, zeros_nm,
                              np.zeros((n, n)), a.copy(), degenerate=True)

    Z_star = Z_1 / value
    N = np.eye(n) - a @ Z_star @ a.T @ Pi
    K_tilde = solve_linear(N, a @ Z_star @ G_r)
    K_hat = solve_linear(N, a @ Z_star @ decomposition.residue)
    K_gamma = K_tilde @ pd_sqrt(mfactor.R_M)
    F_gamma = a - K_tilde @ G_r.T
    approximant = TransferRealization(F_gamma, K_tilde, -decomposition.H @ Pi,
                                      np.zeros((p, m)), "strictly_causal")

    rho = spectral_radius(F_gamma)
    if not rho < 1.0:
        raise UnstableProduct("approximant state matrix F_gamma is not stable",
                              {"system": sys.name, "rho": rho, "gamma_sq": float(value)})
    logger.info(f"{sys.name}: Hankel value gamma^2={value:.10g}, rho(F_gamma)={rho:.4f}")
    return NehariSolution(float(value), approximant, Z_1, Z_star, Pi, K_tilde, K_gamma,
                          K_hat, F_gamma)


def nehari_error(anticausal: TransferRealization, approximant: TransferRealization, omegas) -> np.ndarray:
    """sigma_max of K'(e^jw) - A(e^jw) on the grid"""
    diff = approximant.evaluate_many(omegas) - anticausal.evaluate_many(omegas)
    return np.array([sigma_max(d) for d in diff])
