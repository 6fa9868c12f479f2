"""
Synthesis certificate: every solved constant of a synthesis run together
with the residual of the equation it solves, so a result can be checked
independently of the code that produced it.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from models.lti_system import LtiSystem, normalize_r
from numerics.linalg import pd_inv_sqrt, relative_residual, solve_linear, spectral_radius
from numerics.options import SolverOptions
from numerics.riccati import dare_residual
from utils.exceptions import ResidualTooLarge, UnstableProduct

logger = logging.getLogger(__name__)

RESIDUAL_LIMIT = 1e-8


def residual_limit(options: Optional[SolverOptions] = None) -> float:
    """Certificate bound: 1e-8 unless the solver acceptance is looser"""
    return max(RESIDUAL_LIMIT, options.acceptance) if options is not None else RESIDUAL_LIMIT


MATRIX_FIELDS = ("P", "K_lqr", "T", "M", "R_T", "R_M", "K_M", "A_K", "A_T", "A_M",
                 "Z_1", "Z_star", "Pi", "U", "K_gamma", "F_gamma")


@dataclass
class SynthesisCertificate:
    system_name: str
    method: str
    path: str = ""
    ratio: Optional[float] = None
    value: Optional[float] = None
    P: Optional[np.ndarray] = None
    K_lqr: Optional[np.ndarray] = None
    T: Optional[np.ndarray] = None
    M: Optional[np.ndarray] = None
    R_T: Optional[np.ndarray] = None
    R_M: Optional[np.ndarray] = None
    K_M: Optional[np.ndarray] = None
    A_K: Optional[np.ndarray] = None
    A_T: Optional[np.ndarray] = None
    A_M: Optional[np.ndarray] = None
    Z_1: Optional[np.ndarray] = None
    Z_star: Optional[np.ndarray] = None
    Pi: Optional[np.ndarray] = None
    U: Optional[np.ndarray] = None
    K_gamma: Optional[np.ndarray] = None
    F_gamma: Optional[np.ndarray] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    spectral_radii: Dict[str, float] = field(default_factory=dict)

    def compute_residuals(self, sys: LtiSystem) -> Dict[str, float]:
        """Re-evaluate every equation on the R-normalized plant"""
        sys = normalize_r(sys)
        A, B_u, B_w, Q = sys.A, sys.B_u, sys.B_w, sys.Q
        out: Dict[str, float] = {}
        if self.P is not None:
            out["lqr_riccati"] = dare_residual(A, B_u, Q, np.eye(sys.p), self.P)
        q_sqrt = sys.q_sqrt()
        if self.T is not None:
            out["dual_riccati"] = dare_residual(A.T, q_sqrt, B_u @ B_u.T, np.eye(sys.n), self.T)
        if self.M is not None and self.A_T is not None and self.R_T is not None and self.path == "general":
            left = pd_inv_sqrt(self.R_T)
            C = left @ q_sqrt @ self.A_T
            D = left @ q_sqrt @ B_w
            out["m_riccati"] = dare_residual(self.A_T, B_w, C.T @ C, D.T @ D, self.M, C.T @ D)
        if self.Z_1 is not None and self.A_K is not None and self.P is not None:
            W = B_u @ solve_linear(np.eye(sys.p) + B_u.T @ self.P @ B_u, B_u.T)
            out["z1_lyapunov"] = relative_residual(self.Z_1 - self.A_K @ self.Z_1 @ self.A_K.T - W, self.Z_1, W)
        if self.U is not None and self.A_M is not None and self.K_M is not None:
            C = self.P @ B_w @ self.K_M
            out["u_sylvester"] = relative_residual(self.U - self.A_K.T @ self.U @ self.A_M - C, self.U, C)
        if self.Pi is not None and self.A_K is not None and self.U is not None and self.R_M is not None:
            residue_bw = (self.P - self.A_K.T @ self.U) @ B_w
            W = residue_bw @ solve_linear(self.R_M, residue_bw.T)
            out["pi_lyapunov"] = relative_residual(self.Pi - self.A_K.T @ self.Pi @ self.A_K - W, self.Pi, W)
        return out

    def compute_spectral_radii(self) -> Dict[str, float]:
        return {name: spectral_radius(getattr(self, name))
                for name in ("A_K", "A_T", "A_M", "F_gamma") if getattr(self, name) is not None}

    def verify(self, sys: LtiSystem, limit: float = RESIDUAL_LIMIT) -> bool:
        """
        Recompute residuals and spectral radii. Raises ResidualTooLarge when a
        residual exceeds limit and UnstableProduct when a radius is not below 1.
        """
        self.residuals = self.compute_residuals(sys)
        self.spectral_radii = self.compute_spectral_radii()
        bad_res = {k: v for k, v in self.residuals.items() if not v <= limit}
        bad_rho = {k: v for k, v in self.spectral_radii.items() if not v < 1.0}
        if bad_res:
            logger.error(f"certificate for {self.system_name}/{self.method}: residuals {bad_res}")
            raise ResidualTooLarge(f"{self.method} certificate residual above {limit:g}",
                                   {"system": self.system_name, **bad_res})
        if bad_rho:
            logger.error(f"certificate for {self.system_name}/{self.method}: radii {bad_rho}")
            raise UnstableProduct(f"{self.method} certificate has a state matrix that is not stable",
                                  {"system": self.system_name, **bad_rho})
        return True

    def to_entries(self) -> Dict[str, object]:
        entries: Dict[str, object] = {"system": self.system_name, "method": self.method}
        if self.path:
            entries["path"] = self.path
        if self.ratio is not None:
            entries["ratio"] = float(self.ratio)
        if self.value is not None:
            entries["value"] = float(self.value)
        for name in MATRIX_FIELDS:
            matrix = getattr(self, name)
            if matrix is not None:
                entries[name] = np.asarray(matrix, dtype=float)
        for key, val in self.residuals.items():
            entries[f"residual.{key}"] = float(val)
        for key, val in self.spectral_radii.items():
            entries[f"rho.{key}"] = float(val)
        return entries

    def summary(self) -> str:
        parts = [f"{self.system_name} {self.method}"]
        if self.path:
            parts.append(f"path={self.path}")
        if self.ratio is not None:
            parts.append(f"ratio={self.ratio:.10g}")
        if self.value is not None:
            parts.append(f"value={self.value:.10g}")
        return " ".join(parts)
