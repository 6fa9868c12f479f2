"""
Reduction of the weighted regret problem to a plain one.

Weights act on the cost (W_s on Q^{1/2}x, W_u on u) and on the
disturbance (W_w). Static weights are absorbed into the plant:

    Q_bar = Q^{1/2} W_s Q^{1/2},   B_u_bar = B_u R^{-1/2} W_u^{-1/2}

and W_w becomes a static factor W_w^{1/2} for the Nehari step. The
"clairvoyant" preset uses the canonical factor M(z) instead, which turns
the problem into competitive-ratio synthesis on the weighted plant.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from models.lti_system import LtiSystem, input_back_map, normalize_r
from models.realization import ControllerRealization
from numerics.linalg import as_matrix, pd_inv_sqrt, pd_sqrt, symmetrize
from utils.exceptions import DimensionMismatch, UnsupportedWeight

logger = logging.getLogger(__name__)

WeightSpec = Union[str, np.ndarray, None]


@dataclass(frozen=True)
class WeightedProblem:
    system: LtiSystem           # weighted plant, R = I
    disturbance_weight: str     # "static" or "clairvoyant"
    W_w: Optional[np.ndarray]   # static disturbance weight (m x m)
    back_map: np.ndarray        # u = back_map @ u_bar

    def map_controller(self, original: LtiSystem, controller: ControllerRealization) -> ControllerRealization:
        """Express a controller of the weighted plant in the original input coordinates"""
        mapped = controller.map_output(self.back_map)
        return mapped.with_plant_input(original.A, original.B_u, original.B_w)


def _weight(W, size: int, name: str) -> np.ndarray:
    if W is None:
        return np.eye(size)
    W = symmetrize(as_matrix(W, name))
    if W.shape != (size, size):
        raise DimensionMismatch(f"{name} must be {size}x{size}, got {W.shape}")
    pd_sqrt(W)  # NotPd check
    return W


def weighted_regret_reduce(sys: LtiSystem, W_s=None, W_u=None, W_w: WeightSpec = "identity") -> WeightedProblem:
    """
    W_s, W_u: static positive definite weights (identity when None).
    W_w: "identity", "clairvoyant" or a static positive definite m x m matrix.
    """
    W_s = _weight(W_s, sys.n, "W_s")
    W_u = _weight(W_u, sys.p, "W_u")

    if isinstance(W_w, str):
        if W_w == "identity":
            kind, W_w_matrix = "static", np.eye(sys.m)
        elif W_w == "clairvoyant":
            kind, W_w_matrix = "clairvoyant", None
        else:
            raise UnsupportedWeight(f"unknown disturbance weight preset {W_w!r}",
                                    {"supported": "identity, clairvoyant, static matrix"})
    elif W_w is None:
        kind, W_w_matrix = "static", np.eye(sys.m)
    elif callable(W_w):
        raise UnsupportedWeight("dynamic disturbance weights other than the clairvoyant factor are not supported")
    else:
        kind, W_w_matrix = "static", _weight(W_w, sys.m, "W_w")

    normalized = normalize_r(sys)
    q_sqrt = sys.q_sqrt()
    wu_inv_sqrt = pd_inv_sqrt(W_u)
    weighted = normalized.with_(
        B_u=normalized.B_u @ wu_inv_sqrt,
        Q=symmetrize(q_sqrt @ W_s @ q_sqrt),
        name=f"{sys.name}_weighted",
    )
    back_map = input_back_map(sys) @ wu_inv_sqrt
    logger.info(f"{sys.name}: weighted regret reduction with {kind} disturbance weight")
    return WeightedProblem(weighted, kind, W_w_matrix, back_map)
