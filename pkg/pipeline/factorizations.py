"""
Canonical factorizations of the LQR cost operators.

All functions expect an R-normalized plant (R = I):

    F(z) = Q^{1/2}(zI - A)^-1 B_u,   G(z) = Q^{1/2}(zI - A)^-1 B_w
    Delta*Delta = I + F*F,   Nabla Nabla* = I + FF*,   M*M = G*(I + FF*)^-1 G

Delta, Nabla and M are causal with causal inverses; the constants behind
them (P, T, M and the closed-loop matrices A_K, A_T, A_M) are solved once
here and reused by the decomposition, the Nehari step and the certificates.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.lti_system import LtiSystem
from models.realization import TransferRealization
from numerics.linalg import (
    pd_inv_sqrt,
    pd_sqrt,
    solve_linear,
    spectral_radius,
    symmetrize,
)
from numerics.lyapunov import solve_dlyap
from numerics.options import DEFAULT_OPTIONS, SolverOptions
from numerics.riccati import dare_gain, dare_residual, solve_dare
from utils.exceptions import (
    NumericsError,
    RankDeficientBw,
    RiccatiFailure,
    UpstreamRiccatiFailure,
)

logger = logging.getLogger(__name__)


def _require_normalized(sys: LtiSystem) -> None:
    if not sys.has_identity_r:
        raise ValueError(f"{sys.name}: factorizations expect R = I, call normalize_r first")


def build_F(sys: LtiSystem) -> TransferRealization:
    _require_normalized(sys)
    return TransferRealization(sys.A, sys.B_u, sys.q_sqrt(), np.zeros((sys.n, sys.p)), "strictly_causal")


def build_G(sys: LtiSystem) -> TransferRealization:
    _require_normalized(sys)
    return TransferRealization(sys.A, sys.B_w, sys.q_sqrt(), np.zeros((sys.n, sys.m)), "strictly_causal")


@dataclass(frozen=True)
class LqrSolution:
    P: np.ndarray
    K_lqr: np.ndarray
    Re: np.ndarray  # I + B_u'PB_u
    A_K: np.ndarray


def solve_lqr(sys: LtiSystem, options: Optional[SolverOptions] = None) -> LqrSolution:
    _require_normalized(sys)
    options = options or DEFAULT_OPTIONS
    eye = np.eye(sys.p)
    try:
        P = symmetrize(solve_dare(sys.A, sys.B_u, sys.Q, eye, options=options))
    except NumericsError as e:
        raise RiccatiFailure(f"LQR Riccati equation failed for {sys.name}: {e.message}", e.context) from e
    K = dare_gain(sys.A, sys.B_u, P, eye)
    return LqrSolution(P, K, eye + sys.B_u.T @ P @ sys.B_u, sys.A - sys.B_u @ K)


@dataclass(frozen=True)
class DeltaFactor:
    """Delta(z) = Re^{1/2}(I + K_lqr(zI - A)^-1 B_u) and its inverse on A_K"""
    lqr: LqrSolution
    realization: TransferRealization
    inverse: TransferRealization

    @property
    def P(self) -> np.ndarray:
        return self.lqr.P

    @property
    def K_lqr(self) -> np.ndarray:
        return self.lqr.K_lqr

    @property
    def Re(self) -> np.ndarray:
        return self.lqr.Re

    @property
    def A_K(self) -> np.ndarray:
        return self.lqr.A_K

    @property
    def H(self) -> np.ndarray:
        """Re^{-1/2} B_u'"""
        return pd_inv_sqrt(self.Re) @ np.asarray(self.realization.B).T


def factor_delta(sys: LtiSystem, lqr: Optional[LqrSolution] = None,
                 options: Optional[SolverOptions] = None) -> DeltaFactor:
    _require_normalized(sys)
    if lqr is None:
        try:
            lqr = solve_lqr(sys, options)
        except RiccatiFailure as e:
            raise UpstreamRiccatiFailure(f"Delta factor unavailable: {e.message}", e.context) from e
    re_sqrt = pd_sqrt(lqr.Re)
    realization = TransferRealization(sys.A, sys.B_u, re_sqrt @ lqr.K_lqr, re_sqrt, "causal")
    inverse = realization.inverse()
    logger.debug(f"Delta factor: rho(A_K)={spectral_radius(lqr.A_K):.4f}")
    return DeltaFactor(lqr, realization, inverse)


@dataclass(frozen=True)
class NablaFactor:
    """Nabla(z) = (Q^{1/2}(zI - A)^-1 K_T + I) R_T^{1/2}"""
    T: np.ndarray
    R_T: np.ndarray
    K_T: np.ndarray
    A_T: np.ndarray
    O: np.ndarray  # Lyapunov solution behind T, equal to Z_1
    route: str
    realization: TransferRealization
    inverse: TransferRealization


def _dual_terms(sys: LtiSystem):
    return sys.A.T, sys.q_sqrt(), symmetrize(sys.B_u @ sys.B_u.T), np.eye(sys.n)


def factor_nabla(sys: LtiSystem, delta: DeltaFactor,
                 options: Optional[SolverOptions] = None) -> NablaFactor:
    """
    T is first built from the Lyapunov solution O = A_K O A_K' + B_u Re^-1 B_u'
    as T = O(I - PO)^-1 and checked against the dual Riccati equation; if the
    check fails the dual equation is solved directly.
    """
    _require_normalized(sys)
    options = options or DEFAULT_OPTIONS
    n = sys.n
    P, A_K = delta.P, delta.A_K
    O = symmetrize(solve_dlyap(A_K, sys.B_u @ solve_linear(delta.Re, sys.B_u.T), options))

    A_dual, q_sqrt, Q_dual, R_dual = _dual_terms(sys)
    route = "lyapunov"
    try:
        T = symmetrize(solve_linear(np.eye(n) - O @ P, O))
        residual = dare_residual(A_dual, q_sqrt, Q_dual, R_dual, T)
        if not np.isfinite(residual) or residual > options.acceptance:
            raise NumericsError("Lyapunov route residual too large", {"residual": residual})
    except NumericsError as e:
        logger.info(f"T from O(I - PO)^-1 rejected ({e.message}); solving the dual Riccati equation")
        route = "dare"
        try:
            T = symmetrize(solve_dare(A_dual, q_sqrt, Q_dual, R_dual, options=options))
        except NumericsError as err:
            raise UpstreamRiccatiFailure(f"dual Riccati equation failed: {err.message}", err.context) from err

    R_T = np.eye(n) + q_sqrt @ T @ q_sqrt
    K_T = sys.A @ T @ q_sqrt @ solve_linear(R_T, np.eye(n))
    A_T = sys.A - K_T @ q_sqrt
    rt_sqrt = pd_sqrt(R_T)
    realization = TransferRealization(sys.A, K_T @ rt_sqrt, q_sqrt, rt_sqrt, "causal")
    inverse = realization.inverse()
    rho = spectral_radius(A_T)
    if rho >= 1.0:
        raise UpstreamRiccatiFailure("A_T is not stable", {"rho": rho})
    logger.debug(f"Nabla factor via {route}: rho(A_T)={rho:.4f}")
    return NablaFactor(T, R_T, K_T, A_T, O, route, realization, inverse)


@dataclass(frozen=True)
class MFactor:
    """
    M(z) = R_M^{1/2}(K_M(zI - A_T)^-1 B_w + I), inverse (I - K_M(zI - A_M)^-1 B_w) R_M^{-1/2}.

    kind is "general" (M-Riccati solved), "square" (closed form, M = 0) or
    "static" (a constant weight factor W^{1/2}, K_M = 0). For square B_w the
    finite-impulse-response form R_T^{-1/2}Q^{1/2}(I + A_T(zI - A_T)^-1)B_w is
    kept in square_form; it differs from realization by a constant unitary
    on the left.
    """
    kind: str
    M: np.ndarray
    R_M: np.ndarray
    K_M: np.ndarray
    A_M: np.ndarray
    realization: TransferRealization
    inverse: TransferRealization
    square_form: Optional[TransferRealization] = None
    square_inverse: Optional[TransferRealization] = None
    riccati_terms: Optional[tuple] = None

    @property
    def is_static(self) -> bool:
        return self.kind == "static"


def _m_riccati_terms(sys: LtiSystem, nabla: NablaFactor):
    """(A_T, B_w, C'C, D'D, C'D) with C = R_T^{-1/2}Q^{1/2}A_T and D = R_T^{-1/2}Q^{1/2}B_w"""
    left = pd_inv_sqrt(nabla.R_T) @ sys.q_sqrt()
    C = left @ nabla.A_T
    D = left @ sys.B_w
    return nabla.A_T, sys.B_w, symmetrize(C.T @ C), symmetrize(D.T @ D), C.T @ D


def _factor_realization(A_T, B_w, M, R_M, K_M, kind, square_form=None, square_inverse=None, terms=None) -> MFactor:
    rm_sqrt = pd_sqrt(R_M)
    A_M = A_T - B_w @ K_M
    realization = TransferRealization(A_T, B_w, rm_sqrt @ K_M, rm_sqrt, "causal")
    rm_inv_sqrt = pd_inv_sqrt(R_M)
    inverse = TransferRealization(A_M, B_w @ rm_inv_sqrt, -K_M, rm_inv_sqrt, "causal")
    rho = spectral_radius(A_M)
    if rho >= 1.0:
        raise RiccatiFailure("A_M is not stable", {"rho": rho, "kind": kind})
    return MFactor(kind, M, R_M, K_M, A_M, realization, inverse, square_form, square_inverse, terms)


def factor_M(sys: LtiSystem, nabla: NablaFactor, options: Optional[SolverOptions] = None,
             square: Optional[bool] = None) -> MFactor:
    """
    Canonical factor of G*(I + FF*)^-1 G. square=None dispatches on the
    shape and conditioning of B_w; True forces the closed form.
    """
    _require_normalized(sys)
    options = options or DEFAULT_OPTIONS
    s = np.linalg.svd(sys.B_w, compute_uv=False)
    if sys.m > sys.n or s[-1] <= 1e-9 * s[0]:
        raise RankDeficientBw("B_w must have full column rank", {"min_sigma": float(s[-1])})
    terms = _m_riccati_terms(sys, nabla)
    A_T, B_w, Qc, Rc, S = terms
    if square is None:
        square = sys.has_square_bw

    if square:
        if sys.m != sys.n:
            raise RankDeficientBw("closed-form M factor needs a square B_w", {"n": sys.n, "m": sys.m})
        # M = 0: R_M = B_w'(Q^-1 + T)^-1 B_w and K_M = B_w^-1 A_T
        K_M = solve_linear(B_w, A_T)
        q_sqrt = sys.q_sqrt()
        left = pd_inv_sqrt(nabla.R_T) @ q_sqrt
        right = solve_linear(q_sqrt, pd_sqrt(nabla.R_T))  # Q^{-1/2} R_T^{1/2}
        square_form = TransferRealization(A_T, B_w, left @ A_T, left @ B_w, "causal")
        square_inverse = TransferRealization(np.zeros_like(A_T), right, -K_M,
                                             solve_linear(B_w, right), "causal")
        logger.info(f"{sys.name}: square B_w, M factor in closed form")
        return _factor_realization(A_T, B_w, np.zeros_like(A_T), Rc, K_M, "square",
                                   square_form, square_inverse, terms)

    try:
        M = symmetrize(solve_dare(A_T, B_w, Qc, Rc, S, options=options))
    except NumericsError as e:
        raise RiccatiFailure(f"M Riccati equation failed: {e.message}", e.context) from e
    R_M = symmetrize(Rc + B_w.T @ M @ B_w)
    K_M = dare_gain(A_T, B_w, M, Rc, S)
    return _factor_realization(A_T, B_w, M, R_M, K_M, "general", terms=terms)


def factor_M_static(sys: LtiSystem, W: Optional[np.ndarray] = None) -> MFactor:
    """Constant factor W^{1/2} (identity by default) used by the regret problems"""
    m, n = sys.m, sys.n
    W = np.eye(m) if W is None else symmetrize(np.asarray(W, dtype=float))
    realization = TransferRealization.static(pd_sqrt(W))
    inverse = TransferRealization.static(pd_inv_sqrt(W))
    return MFactor("static", np.zeros((n, n)), W, np.zeros((m, n)), np.zeros((n, n)),
                   realization, inverse)


def m_riccati_residual(mfactor: MFactor) -> float:
    if mfactor.riccati_terms is None:
        return 0.0
    A_T, B_w, Qc, Rc, S = mfactor.riccati_terms
    return dare_residual(A_T, B_w, Qc, Rc, mfactor.M, S)
