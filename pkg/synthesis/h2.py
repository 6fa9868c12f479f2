import logging
from typing import Optional, Tuple

from models.lti_system import LtiSystem, input_back_map, normalize_r
from models.realization import ControllerRealization
from numerics.linalg import spectral_radius
from numerics.options import SolverOptions
from pipeline.factorizations import solve_lqr
from synthesis.certificate import SynthesisCertificate, residual_limit

logger = logging.getLogger(__name__)


def synth_h2(sys: LtiSystem, options: Optional[SolverOptions] = None) -> Tuple[SynthesisCertificate, ControllerRealization]:
    """LQR state feedback u = -K_lqr x, expressed in the plant's own input coordinates"""
    normalized = normalize_r(sys)
    lqr = solve_lqr(normalized, options)
    certificate = SynthesisCertificate(sys.name, "h2", path="lqr", P=lqr.P, K_lqr=lqr.K_lqr, A_K=lqr.A_K)
    certificate.verify(sys, residual_limit(options))
    gain = input_back_map(sys) @ lqr.K_lqr
    controller = ControllerRealization.static_feedback(sys.A, sys.B_u, sys.B_w, gain, "h2")
    logger.info(f"{sys.name}: H2 controller, rho(A_K)={spectral_radius(lqr.A_K):.4f}")
    return certificate, controller
