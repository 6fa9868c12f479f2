"""
Discrete-time LQR plant

    x_{t+1} = A x_t + B_u u_t + B_w w_t,   cost  sum x_t'Q x_t + u_t'R u_t

with the validation of the standing assumptions and the R-normalization.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from numerics.linalg import (
    as_matrix,
    eig_sym,
    pd_inv_sqrt,
    psd_sqrt,
    sigma_max,
    sigma_min,
    spectral_radius,
)
from numerics.riccati import dare_gain, solve_dare
from utils.exceptions import CompetCtlError, DimensionMismatch, ValidationFailed

logger = logging.getLogger(__name__)

RANK_TOL = 1e-9
CIRCLE_TOL = 1e-8
BW_COND_LIMIT = 1e8


def _frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True)
class LtiSystem:
    """Plant matrices A (n x n), B_u (n x p), B_w (n x m), Q (n x n), R (p x p)"""
    A: np.ndarray
    B_u: np.ndarray
    B_w: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    name: str = "system"

    def __post_init__(self):
        for key in ("A", "B_u", "B_w", "Q", "R"):
            object.__setattr__(self, key, _frozen(as_matrix(getattr(self, key), key)))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        if self.B_u.shape[0] != n or self.B_w.shape[0] != n:
            raise DimensionMismatch("B_u and B_w must have as many rows as A",
                                    {"n": n, "B_u": self.B_u.shape, "B_w": self.B_w.shape})
        if self.Q.shape != (n, n):
            raise DimensionMismatch(f"Q must be {n}x{n}, got {self.Q.shape}")
        p = self.B_u.shape[1]
        if self.R.shape != (p, p):
            raise DimensionMismatch(f"R must be {p}x{p}, got {self.R.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B_u.shape[1]

    @property
    def m(self) -> int:
        return self.B_w.shape[1]

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.n, self.p, self.m

    @property
    def is_scalar(self) -> bool:
        return self.dims == (1, 1, 1)

    @property
    def has_square_bw(self) -> bool:
        """B_w square and invertible with condition number below 1e8"""
        if self.m != self.n:
            return False
        smin = sigma_min(self.B_w)
        return smin > 0 and sigma_max(self.B_w) / smin < BW_COND_LIMIT

    @property
    def has_identity_r(self) -> bool:
        return np.array_equal(self.R, np.eye(self.p))

    def with_(self, **changes) -> "LtiSystem":
        return replace(self, **changes)

    def q_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.Q)


def normalize_r(sys: LtiSystem) -> LtiSystem:
    """
    Rescale the input so that R = I: B_u' = B_u R^{-1/2}.

    A controller u' on the normalized plant maps back through u = R^{-1/2} u'.
    """
    if sys.has_identity_r:
        return sys
    r_inv_sqrt = pd_inv_sqrt(sys.R)
    return sys.with_(B_u=sys.B_u @ r_inv_sqrt, R=np.eye(sys.p))


def input_back_map(sys: LtiSystem) -> np.ndarray:
    """R^{-1/2}: maps normalized inputs to the plant's own input coordinates"""
    if sys.has_identity_r:
        return np.eye(sys.p)
    return pd_inv_sqrt(sys.R)


@dataclass
class CheckResult:
    passed: bool
    message: str = ""
    witness: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ValidationReport:
    """Outcome of every standing-assumption check, failures carry a witness"""
    system_name: str
    checks: Dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    @property
    def failures(self) -> Dict[str, CheckResult]:
        return {k: c for k, c in self.checks.items() if not c.passed}

    def to_text(self) -> str:
        lines = [f"# validation report for {self.system_name}"]
        for name, check in self.checks.items():
            status = "pass" if check.passed else "FAIL"
            witness = " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                               for k, v in check.witness.items())
            line = f"{name} = {status}"
            if witness:
                line += f"  # {witness}"
            if check.message and not check.passed:
                line += f"  ({check.message})"
            lines.append(line)
        lines.append(f"valid = {'yes' if self.passed else 'no'}")
        return "\n".join(lines)


def _g_sigma_min(sys: LtiSystem, q_sqrt: np.ndarray, omega: float) -> float:
    z = np.exp(1j * omega)
    resolvent = np.linalg.solve(z * np.eye(sys.n) - sys.A, sys.B_w)
    return sigma_min(q_sqrt @ resolvent)


def _check_g_rank(sys: LtiSystem, grid_size: int) -> CheckResult:
    q_sqrt = psd_sqrt(sys.Q)
    grid = np.linspace(0.0, np.pi, grid_size // 2 + 1)
    values = np.array([_g_sigma_min(sys, q_sqrt, w) for w in grid])
    scale = max(sigma_max(q_sqrt @ np.linalg.solve(np.exp(1j * w) * np.eye(sys.n) - sys.A, sys.B_w))
                for w in grid[:: max(1, len(grid) // 16)])
    k = int(np.argmin(values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    best_omega, best = grid[k], float(values[k])
    if hi > lo:
        refined = minimize_scalar(lambda w: _g_sigma_min(sys, q_sqrt, w), bounds=(lo, hi),
                                  method="bounded", options={"maxiter": 30})
        if refined.fun < best:
            best_omega, best = float(refined.x), float(refined.fun)
    tol = RANK_TOL * max(scale, 1e-300)
    return CheckResult(best > tol, "G(e^jw) loses column rank",
                       {"min_sigma": best, "omega": best_omega, "rank_tol": tol})


def validate(sys: LtiSystem, grid_size: int = 256) -> ValidationReport:
    """
    Check the standing assumptions; never raises, failures are recorded with witnesses
    """
    report = ValidationReport(sys.name)

    for key, matrix in (("q_pd", sys.Q), ("r_pd", sys.R)):
        w, _ = eig_sym(matrix)
        symmetric = np.allclose(matrix, matrix.T, atol=1e-12 * max(np.abs(matrix).max(), 1.0))
        report.checks[key] = CheckResult(bool(symmetric and w[-1] > 0), f"{key[0].upper()} must be symmetric positive definite",
                                         {"min_eig": float(w[-1])})

    eigs = np.linalg.eigvals(sys.A) if sys.n else np.zeros(0)
    distance = float(np.min(np.abs(np.abs(eigs) - 1.0))) if eigs.size else np.inf
    report.checks["unit_circle"] = CheckResult(distance > CIRCLE_TOL, "A has an eigenvalue on the unit circle",
                                               {"min_distance": distance, "rho": spectral_radius(sys.A)})

    if report.checks["r_pd"].passed and report.checks["q_pd"].passed:
        try:
            normalized = normalize_r(sys)
            P = solve_dare(normalized.A, normalized.B_u, normalized.Q, np.eye(sys.p))
            K = dare_gain(normalized.A, normalized.B_u, P, np.eye(sys.p))
            rho = spectral_radius(normalized.A - normalized.B_u @ K)
            report.checks["stabilizable"] = CheckResult(True, "", {"closed_loop_rho": rho})
        except (CompetCtlError, np.linalg.LinAlgError) as e:
            report.checks["stabilizable"] = CheckResult(False, str(e), {"closed_loop_rho": float("nan")})
    else:
        report.checks["stabilizable"] = CheckResult(False, "skipped: Q or R not positive definite")

    s = np.linalg.svd(sys.B_w, compute_uv=False)
    tol = RANK_TOL * (s[0] if s.size else 0.0)
    rank_ok = sys.m <= sys.n and s.size == sys.m and s[-1] > tol
    report.checks["bw_rank"] = CheckResult(bool(rank_ok), "B_w must have full column rank",
                                           {"min_sigma": float(s[-1]) if s.size else 0.0, "rank_tol": float(tol)})

    if report.checks["unit_circle"].passed and report.checks["q_pd"].passed:
        report.checks["g_rank"] = _check_g_rank(sys, grid_size)
    else:
        report.checks["g_rank"] = CheckResult(False, "skipped: needs Q > 0 and no unit-circle eigenvalues")

    level = logging.INFO if report.passed else logging.WARNING
    logger.log(level, f"Validated {sys.name}: {'pass' if report.passed else 'fail: ' + ', '.join(report.failures)}")
    return report


def require_valid(sys: LtiSystem, grid_size: int = 256) -> ValidationReport:
    report = validate(sys, grid_size)
    if not report.passed:
        raise ValidationFailed(f"{sys.name} fails: {', '.join(report.failures)}", report)
    return report

