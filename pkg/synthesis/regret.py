import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from models.lti_system import LtiSystem
from models.realization import ControllerRealization
from numerics.options import DEFAULT_OPTIONS, SolverOptions
from pipeline.assembly import assemble_controller
from pipeline.decomposition import decompose
from pipeline.factorizations import factor_delta, factor_M_static
from pipeline.nehari import NehariSolution, nehari_solve
from pipeline.weighted_regret import WeightedProblem, WeightSpec, weighted_regret_reduce
from synthesis.certificate import SynthesisCertificate, residual_limit
from synthesis.competitive import synth_cr_parts

logger = logging.getLogger(__name__)


@dataclass
class RegretSynthesis:
    value: float
    controller: ControllerRealization
    certificate: SynthesisCertificate
    problem: WeightedProblem
    nehari: Optional[NehariSolution] = None


def synth_weighted_regret(sys: LtiSystem, W_s=None, W_u=None, W_w: WeightSpec = "identity",
                          options: Optional[SolverOptions] = None) -> RegretSynthesis:
    """
    Regret-optimal controller for static state/input weights and a static or
    clairvoyant disturbance weight. The controller acts on the original plant.
    """
    options = options or DEFAULT_OPTIONS
    problem = weighted_regret_reduce(sys, W_s, W_u, W_w)
    weighted = problem.system

    if problem.disturbance_weight == "clairvoyant":
        parts = synth_cr_parts(weighted, options=options)
        certificate = parts.certificate
        certificate.method = "regret"
        value = certificate.ratio - 1.0
        controller = problem.map_controller(sys, parts.controller)
        controller.method = "regret"
        logger.info(f"{sys.name}: clairvoyant-weighted regret {value:.10g}")
        return RegretSynthesis(value, controller, certificate, problem, parts.nehari)

    delta = factor_delta(weighted, options=options)
    mfactor = factor_M_static(weighted, problem.W_w)
    decomposition = decompose(weighted, delta, mfactor, options)
    nehari = nehari_solve(weighted, delta, decomposition, mfactor, options=options)
    assembled = assemble_controller(weighted, delta, mfactor, decomposition, nehari, method="regret")
    controller = problem.map_controller(sys, assembled.reduced)

    certificate = SynthesisCertificate(
        weighted.name, "regret", path="static", value=nehari.value,
        P=delta.P, K_lqr=delta.K_lqr, R_M=mfactor.R_M, K_M=mfactor.K_M, A_K=delta.A_K,
        A_M=mfactor.A_M, Z_1=nehari.Z_1, Z_star=nehari.Z_star, Pi=nehari.Pi, U=decomposition.U,
        K_gamma=nehari.K_gamma, F_gamma=nehari.F_gamma,
    )
    certificate.verify(weighted, residual_limit(options))
    logger.info(f"{sys.name}: regret {nehari.value:.10g}")
    return RegretSynthesis(nehari.value, controller, certificate, problem, nehari)


def synth_regret(sys: LtiSystem, options: Optional[SolverOptions] = None) -> Tuple[float, ControllerRealization]:
    result = synth_weighted_regret(sys, options=options)
    return result.value, result.controller
