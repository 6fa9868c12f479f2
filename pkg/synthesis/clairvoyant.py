"""
The clairvoyant (non-causal) benchmark. It sees the whole disturbance
sequence, so it has no state-space realization; it is available for
frequency-domain evaluation only.
"""
import logging

import numpy as np

from models.lti_system import LtiSystem, input_back_map, normalize_r
from pipeline.factorizations import build_F, build_G

logger = logging.getLogger(__name__)


def _hermitian(X: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(X, -1, -2))


def clairvoyant_cost_many(sys: LtiSystem, omegas) -> np.ndarray:
    """G^H (I + F F^H)^-1 G at each frequency, shape (len(omegas), m, m)"""
    normalized = normalize_r(sys)
    F = build_F(normalized).evaluate_many(omegas)
    G = build_G(normalized).evaluate_many(omegas)
    eye = np.eye(sys.n)[None]
    inner = np.linalg.solve(eye + F @ _hermitian(F), G)
    cost = _hermitian(G) @ inner
    return 0.5 * (cost + _hermitian(cost))


def clairvoyant_response(sys: LtiSystem, omega: float) -> np.ndarray:
    return clairvoyant_cost_many(sys, [omega])[0]


class ClairvoyantController:
    """K_0(e^jw) = -R^{-1/2}(I + F^H F)^-1 F^H G on the normalized plant"""

    kind = "noncausal"
    realizable = False
    n_states = 0

    def __init__(self, sys: LtiSystem, method: str = "noncausal"):
        self.system = sys
        self.method = method
        self._normalized = normalize_r(sys)
        self._back_map = input_back_map(sys)

    @property
    def p(self) -> int:
        return self.system.p

    @property
    def m(self) -> int:
        return self.system.m

    def evaluate_many(self, omegas) -> np.ndarray:
        F = build_F(self._normalized).evaluate_many(omegas)
        G = build_G(self._normalized).evaluate_many(omegas)
        FH = _hermitian(F)
        eye = np.eye(self.system.p)[None]
        K0 = -np.linalg.solve(eye + FH @ F, FH @ G)
        return self._back_map[None] @ K0

    def evaluate(self, omega: float) -> np.ndarray:
        return self.evaluate_many([omega])[0]

    def __repr__(self) -> str:
        return f"ClairvoyantController({self.system.name})"


def synth_noncausal(sys: LtiSystem) -> ClairvoyantController:
    logger.info(f"{sys.name}: clairvoyant benchmark controller (frequency evaluation only)")
    return ClairvoyantController(sys)
