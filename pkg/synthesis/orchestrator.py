import logging
import time
from typing import Any, Callable, Dict, Iterable, Optional

from models.lti_system import LtiSystem
from numerics.options import SolverOptions
from synthesis.clairvoyant import synth_noncausal
from synthesis.competitive import synth_cr
from synthesis.h2 import synth_h2
from synthesis.hinf import synth_hinf
from synthesis.regret import synth_weighted_regret
from utils.config import get_config
from utils.exceptions import CompetCtlError, UnsupportedMethod
from utils.logging_config import create_structured_logger

logger = logging.getLogger(__name__)
step_log = create_structured_logger(__name__)

METHODS = ("h2", "hinf", "cr", "regret", "noncausal")


class SynthesisOrchestrator:
    """
    Runs a list of synthesis methods on one plant. Each method produces a
    result dictionary; a failing method records its error and the remaining
    methods still run.
    """

    def __init__(self, options: Optional[SolverOptions] = None, hinf_tol: Optional[float] = None,
                 grid_size: Optional[int] = None):
        self.options = options or get_config().solver_options()
        self.hinf_tol = hinf_tol
        self.grid_size = grid_size
        self._handlers: Dict[str, Callable[[LtiSystem], Dict[str, Any]]] = {
            "h2": self._run_h2,
            "hinf": self._run_hinf,
            "cr": self._run_cr,
            "regret": self._run_regret,
            "noncausal": self._run_noncausal,
        }

    def _run_h2(self, sys: LtiSystem) -> Dict[str, Any]:
        certificate, controller = synth_h2(sys, self.options)
        return {"controller": controller, "certificate": certificate, "value": None}

    def _run_hinf(self, sys: LtiSystem) -> Dict[str, Any]:
        result = synth_hinf(sys, tol=self.hinf_tol, grid_size=self.grid_size, options=self.options)
        return {"controller": result.controller, "certificate": None, "value": result.gamma,
                "bracket": (result.lower, result.upper), "iterations": result.iterations}

    def _run_cr(self, sys: LtiSystem) -> Dict[str, Any]:
        certificate, controller = synth_cr(sys, options=self.options)
        return {"controller": controller, "certificate": certificate, "value": certificate.ratio}

    def _run_regret(self, sys: LtiSystem) -> Dict[str, Any]:
        result = synth_weighted_regret(sys, options=self.options)
        return {"controller": result.controller, "certificate": result.certificate, "value": result.value}

    def _run_noncausal(self, sys: LtiSystem) -> Dict[str, Any]:
        return {"controller": synth_noncausal(sys), "certificate": None, "value": None}

    def synthesize(self, sys: LtiSystem, method: str) -> Dict[str, Any]:
        handler = self._handlers.get(method)
        if handler is None:
            raise UnsupportedMethod(f"unknown synthesis method {method!r}", {"choices": METHODS})
        start = time.time()
        try:
            result = handler(sys)
            result["success"] = True
            result["method"] = method
            step_log.log_synthesis_step(method, "completed", time.time() - start, system=sys.name)
            return result
        except CompetCtlError as e:
            logger.error(f"{method} synthesis failed on {sys.name}: {e}", exc_info=True)
            step_log.log_synthesis_step(method, "failed", time.time() - start, system=sys.name)
            return {"success": False, "method": method, "error": str(e), "error_type": type(e).__name__}

    def run(self, sys: LtiSystem, methods: Iterable[str]) -> Dict[str, Dict[str, Any]]:
        methods = list(methods)
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise UnsupportedMethod(f"unknown synthesis methods {unknown}", {"choices": METHODS})
        logger.info(f"{sys.name}: synthesizing {', '.join(methods)}")
        return {method: self.synthesize(sys, method) for method in methods}


def successful_controllers(results: Dict[str, Dict[str, Any]]) -> Dict[str, Any]:
    return {method: r["controller"] for method, r in results.items() if r.get("success")}
