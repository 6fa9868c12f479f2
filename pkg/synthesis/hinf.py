"""
H-infinity baseline: bisection on the level gamma of the full-information
game Riccati equation, returning the central state-feedback controller at
the smallest feasible level found.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from freqeval.metrics import FrequencyEvaluator
from models.lti_system import LtiSystem, input_back_map, normalize_r
from models.realization import ControllerRealization
from numerics.options import SolverOptions
from numerics.riccati import game_gain, solve_game_dare
from synthesis.clairvoyant import clairvoyant_cost_many
from synthesis.h2 import synth_h2
from utils.config import get_config
from utils.exceptions import InfeasibleAtUpperBound, NumericsError

logger = logging.getLogger(__name__)


@dataclass
class HinfResult:
    gamma: float
    controller: ControllerRealization
    X: np.ndarray
    lower: float
    upper: float
    iterations: int


def _feasible(sys: LtiSystem, gamma: float, options: SolverOptions) -> Optional[np.ndarray]:
    try:
        return solve_game_dare(sys.A, sys.B_u, sys.B_w, sys.Q, gamma, options)
    except NumericsError as e:
        logger.debug(f"gamma={gamma:.8g} infeasible: {e.message}")
        return None


def hinf_bracket(sys: LtiSystem, grid_size: Optional[int] = None,
                 options: Optional[SolverOptions] = None) -> Tuple[float, float]:
    """
    Lower end: square root of the largest clairvoyant cost eigenvalue on the
    grid. Upper end: twice the grid operator norm of the H2 closed loop.
    """
    evaluator = FrequencyEvaluator(sys, grid_size=grid_size, options=options)
    grid = evaluator.grid[: evaluator.grid_size // 2 + 1]
    floor = np.linalg.eigvalsh(clairvoyant_cost_many(sys, grid))[:, -1]
    lower = float(np.sqrt(max(np.max(floor), 0.0)))
    _, h2 = synth_h2(sys, options)
    T = evaluator.transfer_many(h2, grid)
    upper = 2.0 * float(np.max(np.linalg.svd(T, compute_uv=False)[:, 0]))
    return lower, max(upper, lower * (1.0 + 1e-6), np.finfo(float).tiny)


def synth_hinf(sys: LtiSystem, tol: Optional[float] = None, max_doublings: Optional[int] = None,
               grid_size: Optional[int] = None, options: Optional[SolverOptions] = None) -> HinfResult:
    config = get_config()
    tol = tol if tol is not None else config.hinf.bisection_tol
    max_doublings = max_doublings if max_doublings is not None else config.hinf.max_doublings
    options = options or config.solver_options()
    normalized = normalize_r(sys)

    lower, upper = hinf_bracket(sys, grid_size, options)
    X = _feasible(normalized, upper, options)
    doublings = 0
    while X is None:
        if doublings >= max_doublings:
            raise InfeasibleAtUpperBound("no feasible gamma after doubling the upper bracket",
                                         {"upper": upper, "doublings": doublings})
        upper *= 2.0
        doublings += 1
        X = _feasible(normalized, upper, options)
    logger.info(f"{sys.name}: H-infinity bracket [{lower:.6g}, {upper:.6g}] after {doublings} doublings")

    lo, hi, X_hi = lower, upper, X
    iterations = 0
    while (hi - lo) > tol * hi:
        iterations += 1
        mid = 0.5 * (lo + hi)
        X_mid = _feasible(normalized, mid, options)
        if X_mid is None:
            lo = mid
        else:
            hi, X_hi = mid, X_mid

    K = game_gain(normalized.A, normalized.B_u, normalized.B_w, X_hi, hi)
    gain = input_back_map(sys) @ K
    controller = ControllerRealization.static_feedback(sys.A, sys.B_u, sys.B_w, gain, "hinf")
    logger.info(f"{sys.name}: H-infinity level {hi:.8g} after {iterations} bisection steps")
    return HinfResult(hi, controller, X_hi, lower, upper, iterations)
