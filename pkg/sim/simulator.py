"""
Closed-loop rollout of a plant under a causal controller.

All trials advance together as one (trials, n) batch. Feedback controllers
see only the plant state: their internal update consumes
b_t = x_{t+1} - A x_t - B_u u_t, which equals B_w w_t.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from models.lti_system import LtiSystem
from numerics.linalg import spectral_radius
from sim.disturbances import DisturbanceSource, DisturbanceSpec
from utils.config import get_config
from utils.exceptions import NonFiniteState, UnstableLoop, UnsupportedController
from utils.logging_config import LogTimer

logger = logging.getLogger(__name__)

BLOCK = 4096
FINITE_CHECK_EVERY = 1000

TIME_COLUMNS = ["t", "trial", "cost_avg"]
SUMMARY_COLUMNS = ["controller", "disturbance", "mean", "stderr", "T", "trials"]


@dataclass
class SimResult:
    """
    cost_avg[i, k] is the running average stage cost of trial i over the
    steps burn_in .. burn_in + k.
    """
    controller: str
    disturbance: str
    cost_avg: np.ndarray
    burn_in: int = 0
    states: Optional[np.ndarray] = None
    inputs: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return self.cost_avg.shape[0]

    @property
    def horizon(self) -> int:
        return self.burn_in + self.cost_avg.shape[1]

    @property
    def finals(self) -> np.ndarray:
        return self.cost_avg[:, -1]

    @property
    def mean(self) -> float:
        return float(np.mean(self.finals))

    @property
    def stderr(self) -> float:
        if self.trials < 2:
            return 0.0
        return float(np.std(self.finals, ddof=1) / math.sqrt(self.trials))

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "controller": self.controller,
            "disturbance": self.disturbance,
            "mean": self.mean,
            "stderr": self.stderr,
            "T": self.horizon,
            "trials": self.trials,
        }], columns=SUMMARY_COLUMNS)

    def to_frames(self, stride: int = 1) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """(per-time frame with t,trial,cost_avg; one-row summary frame)"""
        steps = self.cost_avg.shape[1]
        keep = np.arange(stride - 1, steps, stride)
        if keep.size == 0 or keep[-1] != steps - 1:
            keep = np.append(keep, steps - 1)
        t = self.burn_in + keep + 1
        per_time = pd.DataFrame({
            "t": np.tile(t, self.trials),
            "trial": np.repeat(np.arange(self.trials), keep.size),
            "cost_avg": self.cost_avg[:, keep].ravel(),
        }, columns=TIME_COLUMNS)
        return per_time, self.summary_frame()

    def save_csv(self, per_time_path: str, summary_path: Optional[str] = None, stride: int = 1) -> None:
        per_time, summary = self.to_frames(stride)
        per_time.to_csv(per_time_path, index=False, float_format="%.17g")
        if summary_path:
            summary.to_csv(summary_path, index=False, float_format="%.17g")


def _check_loop(sys: LtiSystem, controller) -> float:
    if controller.kind == "feedback":
        radius = controller.closed_loop_radius()
    else:
        nk = controller.Ak.shape[0]
        joint = np.block([[sys.A, sys.B_u @ controller.Ck],
                          [np.zeros((nk, sys.n)), controller.Ak]])
        radius = spectral_radius(joint)
    if radius >= 1.0:
        raise UnstableLoop("closed loop is not stable", {"spectral_radius": radius,
                                                        "controller": controller.method})
    return radius


def simulate(sys: LtiSystem, controller, dist: DisturbanceSpec, trials: Optional[int] = None,
             seed: Optional[int] = None, burn_in: Optional[int] = None, reconstruct: bool = True,
             keep_trajectories: bool = False) -> SimResult:
    """
    Roll the loop forward from x_0 = 0 for dist.horizon steps. The stage cost
    at step t is x_t'Q x_t + u_t'R u_t. Sinusoidal runs exclude a
    burn-in from the averages; other runs average from t = 0.
    """
    if not getattr(controller, "realizable", True):
        raise UnsupportedController("the clairvoyant controller cannot be simulated causally")
    config = get_config().simulation
    trials = trials if trials is not None else config.trials
    seed = seed if seed is not None else dist.seed
    if trials < 1:
        raise ValueError("trials must be at least 1")
    T = dist.horizon
    if burn_in is None:
        burn_in = config.burn_in if dist.kind == "sine" else 0
    if not 0 <= burn_in < T:
        raise ValueError(f"burn-in {burn_in} must lie in [0, {T})")

    radius = _check_loop(sys, controller)
    logger.info(f"{sys.name}: simulating {controller.method or controller.kind} under {dist.label}, "
                f"T={T}, trials={trials}, loop radius {radius:.6f}")

    A, B_u, B_w, Q, R = sys.A, sys.B_u, sys.B_w, sys.Q, sys.R
    feedback = controller.kind == "feedback"
    if feedback:
        Ac, Bc, Cc, Dx = controller.Ac, controller.Bc, controller.Cc, controller.Dx
        xi = np.zeros((trials, Ac.shape[0]))
    else:
        Ak, Bk, Ck = controller.Ak, controller.Bk, controller.Ck
        eta = np.zeros((trials, Ak.shape[0]))

    sources = [DisturbanceSource(dist, sys.m, trial, seed) for trial in range(trials)]
    x = np.zeros((trials, sys.n))
    running = np.zeros(trials)
    cost_avg = np.empty((trials, T - burn_in))
    states = np.empty((trials, T + 1, sys.n)) if keep_trajectories else None
    inputs = np.empty((trials, T, sys.p)) if keep_trajectories else None
    if keep_trajectories:
        states[:, 0] = x

    with LogTimer(logger, f"simulate {controller.method or controller.kind}", logging.DEBUG):
        for start in range(0, T, BLOCK):
            count = min(BLOCK, T - start)
            W = np.stack([source.block(count) for source in sources], axis=1)
            for k in range(count):
                t = start + k
                w = W[k]
                if feedback:
                    u = xi @ Cc.T + x @ Dx.T
                else:
                    u = eta @ Ck.T
                if t >= burn_in:
                    stage = np.einsum("ij,jk,ik->i", x, Q, x) + np.einsum("ij,jk,ik->i", u, R, u)
                    running += stage
                    cost_avg[:, t - burn_in] = running / (t - burn_in + 1)
                x_next = x @ A.T + u @ B_u.T + w @ B_w.T
                if feedback:
                    b = (x_next - x @ A.T - u @ B_u.T) if reconstruct else w @ B_w.T
                    xi = xi @ Ac.T + b @ Bc.T
                else:
                    eta = eta @ Ak.T + w @ Bk.T
                x = x_next
                if keep_trajectories:
                    states[:, t + 1] = x
                    inputs[:, t] = u
                if (t + 1) % FINITE_CHECK_EVERY == 0 and not np.all(np.isfinite(x)):
                    raise NonFiniteState("state overflowed during simulation", {"t": t + 1})
        if not np.all(np.isfinite(x)):
            raise NonFiniteState("state overflowed during simulation", {"t": T})

    result = SimResult(controller.method or controller.kind, dist.label, cost_avg, burn_in, states, inputs,
                       {"system": sys.name, "seed": seed})
    logger.info(f"{sys.name}: {result.controller} mean cost {result.mean:.8g} (stderr {result.stderr:.3g})")
    return result
