"""
Split of -Delta^{-*} F* G M^-1 into a strictly anticausal-plus-constant
part A(z) and the causal parts C1(z), C2(z).

With H = Re^{-1/2} B_u' and U solving U = A_K' U A_M + P B_w K_M:

    A(z)  = -H (I - z A_K')^-1 (P - A_K'U) B_w R_M^{-1/2}
    C1(z) = -H P A (zI - A)^-1 B_w M^-1(z)
    C2(z) =  H U (zI - A_M)^-1 B_w R_M^{-1/2}
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.lti_system import LtiSystem
from models.realization import TransferRealization
from numerics.linalg import pd_inv_sqrt, relative_residual
from numerics.lyapunov import solve_sylvester
from numerics.options import DEFAULT_OPTIONS, SolverOptions
from pipeline.factorizations import DeltaFactor, MFactor, build_F, build_G

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Decomposition:
    anticausal_part: TransferRealization
    causal_first: TransferRealization
    causal_second: TransferRealization
    U: np.ndarray
    residue: np.ndarray  # P - A_K'U
    G_r: np.ndarray      # residue @ B_w @ R_M^{-1/2}
    H: np.ndarray

    @property
    def causal_parts(self):
        return self.causal_first, self.causal_second


def decompose(sys: LtiSystem, delta: DeltaFactor, mfactor: MFactor,
              options: Optional[SolverOptions] = None) -> Decomposition:
    options = options or DEFAULT_OPTIONS
    P, A_K = delta.P, delta.A_K
    H = delta.H
    n, m = sys.n, sys.m

    if mfactor.is_static:
        U = np.zeros((n, n))
    elif mfactor.kind == "square":
        U = P @ mfactor.realization.A  # P A_T, since A_M = 0
    else:
        U = solve_sylvester(A_K.T, mfactor.A_M, P @ sys.B_w @ mfactor.K_M, options)

    residue = P - A_K.T @ U
    rm_inv_sqrt = pd_inv_sqrt(mfactor.R_M)
    G_r = residue @ sys.B_w @ rm_inv_sqrt

    # stored in zeta = 1/z: -H G_r - H A_K' (zeta I - A_K')^-1 G_r
    anticausal = TransferRealization(A_K.T, G_r, -H @ A_K.T, -H @ G_r, "anticausal")

    lead = TransferRealization(sys.A, sys.B_w, -H @ P @ sys.A, np.zeros((sys.p, m)), "strictly_causal")
    causal_first = lead.series(mfactor.inverse)
    if mfactor.is_static:
        causal_second = TransferRealization.zero(sys.p, m)
    else:
        causal_second = TransferRealization(mfactor.A_M, sys.B_w @ rm_inv_sqrt, H @ U,
                                            np.zeros((sys.p, m)), "strictly_causal")
    logger.debug(f"decomposition: ||U||={np.linalg.norm(U):.4g} ||G_r||={np.linalg.norm(G_r):.4g}")
    return Decomposition(anticausal, causal_first, causal_second, U, residue, G_r, H)


def target_response(sys: LtiSystem, delta: DeltaFactor, mfactor: MFactor, omegas) -> np.ndarray:
    """-Delta(e^jw)^{-H} F^H G M^-1 on the grid, evaluated directly"""
    F = build_F(sys).evaluate_many(omegas)
    G = build_G(sys).evaluate_many(omegas)
    delta_inv = delta.inverse.evaluate_many(omegas)
    m_inv = mfactor.inverse.evaluate_many(omegas)
    FH = np.conj(np.swapaxes(F, 1, 2))
    delta_inv_H = np.conj(np.swapaxes(delta_inv, 1, 2))
    return -delta_inv_H @ FH @ G @ m_inv


def decomposition_residual(sys: LtiSystem, delta: DeltaFactor, mfactor: MFactor,
                           decomposition: Decomposition, omegas) -> float:
    """Largest relative grid error of A + C1 + C2 against the direct product"""
    target = target_response(sys, delta, mfactor, omegas)
    total = (decomposition.anticausal_part.evaluate_many(omegas)
             + decomposition.causal_first.evaluate_many(omegas)
             + decomposition.causal_second.evaluate_many(omegas))
    return max(relative_residual(total[k] - target[k], target[k]) for k in range(len(target)))
