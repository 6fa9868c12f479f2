"""
Competitive-ratio optimal synthesis.

Three paths produce the same optimum:
    scalar   n = p = m = 1, the LQR law is optimal and the ratio is closed form
    square   B_w square and well conditioned, M factor and Pi in closed form
    general  M-Riccati, Sylvester equation for U and the Nehari step
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from models.lti_system import LtiSystem, input_back_map, normalize_r
from models.realization import ControllerRealization
from numerics.linalg import invert, symmetrize
from numerics.lyapunov import solve_dlyap
from numerics.options import DEFAULT_OPTIONS, SolverOptions
from pipeline.assembly import AssembledController, assemble_controller
from pipeline.decomposition import Decomposition, decompose
from pipeline.factorizations import (
    DeltaFactor,
    MFactor,
    NablaFactor,
    factor_delta,
    factor_M,
    factor_nabla,
    solve_lqr,
)
from pipeline.nehari import NehariSolution, nehari_solve
from synthesis.certificate import SynthesisCertificate, residual_limit
from utils.exceptions import RankDeficientBw, UnsupportedMethod

logger = logging.getLogger(__name__)

PATHS = ("auto", "general", "square", "scalar")


@dataclass
class CrSynthesis:
    """Every intermediate of one competitive-ratio synthesis, on the R-normalized plant"""
    system: LtiSystem
    path: str
    certificate: SynthesisCertificate
    controller: ControllerRealization
    raw_controller: Optional[ControllerRealization] = None
    delta: Optional[DeltaFactor] = None
    nabla: Optional[NablaFactor] = None
    mfactor: Optional[MFactor] = None
    decomposition: Optional[Decomposition] = None
    nehari: Optional[NehariSolution] = None
    assembled: Optional[AssembledController] = None


def choose_path(sys: LtiSystem, path: str = "auto") -> str:
    if path not in PATHS:
        raise UnsupportedMethod(f"unknown synthesis path {path!r}", {"paths": ", ".join(PATHS)})
    if path != "auto":
        if path == "scalar" and not sys.is_scalar:
            raise UnsupportedMethod("scalar path needs n = p = m = 1", {"dims": sys.dims})
        if path == "square" and sys.m != sys.n:
            raise RankDeficientBw("square path needs a square B_w", {"n": sys.n, "m": sys.m})
        return path
    if sys.is_scalar:
        return "scalar"
    if sys.has_square_bw:
        return "square"
    return "general"


def scalar_ratio(sys: LtiSystem, P: float) -> float:
    """1 + B_u^2 P^2 / Q on the normalized scalar plant"""
    b = float(sys.B_u[0, 0])
    return 1.0 + b * b * P * P / float(sys.Q[0, 0])


def _synth_scalar(sys: LtiSystem, normalized: LtiSystem, options: SolverOptions) -> CrSynthesis:
    lqr = solve_lqr(normalized, options)
    ratio = scalar_ratio(normalized, float(lqr.P[0, 0]))
    certificate = SynthesisCertificate(sys.name, "cr", path="scalar", ratio=ratio, value=ratio - 1.0,
                                       P=lqr.P, K_lqr=lqr.K_lqr, A_K=lqr.A_K)
    gain = input_back_map(sys) @ lqr.K_lqr
    controller = ControllerRealization.static_feedback(sys.A, sys.B_u, sys.B_w, gain, "cr")
    return CrSynthesis(normalized, "scalar", certificate, controller)


def synth_cr_parts(sys: LtiSystem, path: str = "auto",
                   options: Optional[SolverOptions] = None) -> CrSynthesis:
    options = options or DEFAULT_OPTIONS
    normalized = normalize_r(sys)
    chosen = choose_path(normalized, path)
    logger.info(f"{sys.name}: competitive-ratio synthesis on the {chosen} path (dims={sys.dims})")

    if chosen == "scalar":
        result = _synth_scalar(sys, normalized, options)
        result.certificate.verify(sys, residual_limit(options))
        return result

    delta = factor_delta(normalized, options=options)
    nabla = factor_nabla(normalized, delta, options)
    mfactor = factor_M(normalized, nabla, options, square=(chosen == "square"))
    decomposition = decompose(normalized, delta, mfactor, options)

    Pi = None
    if chosen == "square":
        # Pi_bar = A_K' Pi_bar A_K + (P - A_K'PA_T)(Q^-1 + T)(P - A_T'PA_K)
        residue = decomposition.residue
        weight = invert(normalized.Q) + nabla.T
        Pi = solve_dlyap(delta.A_K.T, symmetrize(residue @ weight @ residue.T), options)

    nehari = nehari_solve(normalized, delta, decomposition, mfactor, Pi=Pi, Z_1=nabla.O, options=options)
    assembled = assemble_controller(normalized, delta, mfactor, decomposition, nehari, method="cr")

    back_map = input_back_map(sys)
    controller = assembled.reduced.map_output(back_map).with_plant_input(sys.A, sys.B_u, sys.B_w)
    raw = assembled.raw.map_output(back_map)

    certificate = SynthesisCertificate(
        sys.name, "cr", path=chosen, ratio=1.0 + nehari.value, value=nehari.value,
        P=delta.P, K_lqr=delta.K_lqr, T=nabla.T, M=mfactor.M, R_T=nabla.R_T, R_M=mfactor.R_M,
        K_M=mfactor.K_M, A_K=delta.A_K, A_T=nabla.A_T, A_M=mfactor.A_M, Z_1=nehari.Z_1,
        Z_star=nehari.Z_star, Pi=nehari.Pi, U=decomposition.U, K_gamma=nehari.K_gamma,
        F_gamma=nehari.F_gamma,
    )
    certificate.verify(sys, residual_limit(options))
    logger.info(f"{sys.name}: competitive ratio {certificate.ratio:.10g} ({chosen} path)")
    return CrSynthesis(normalized, chosen, certificate, controller, raw, delta, nabla, mfactor,
                       decomposition, nehari, assembled)


def synth_cr(sys: LtiSystem, path: str = "auto",
             options: Optional[SolverOptions] = None) -> Tuple[SynthesisCertificate, ControllerRealization]:
    result = synth_cr_parts(sys, path, options)
    return result.certificate, result.controller


def closed_form_ratio(sys: LtiSystem) -> float:
    """Scalar closed form for any scalar plant, after normalization"""
    normalized = normalize_r(sys)
    lqr = solve_lqr(normalized)
    return scalar_ratio(normalized, float(np.asarray(lqr.P)[0, 0]))
