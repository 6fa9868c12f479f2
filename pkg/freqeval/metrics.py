"""
Frequency-domain metrics of a controller K on the plant:

    T_K(z) = [Q^{1/2}(zI - A)^-1 (B_u K(z) + B_w); R^{1/2} K(z)]

    frob_density  trace T_K^H T_K               (integrated: squared Frobenius norm)
    opnorm        sigma_max(T_K)^2
    regret        lambda_max(T_K^H T_K - T_0^H T_0)
    cr            lambda_max(M^-H T_K^H T_K M^-1)

The grid is 2 pi k / N. Real-coefficient plants are evaluated on [0, pi]
and mirrored; sup values are refined with a bounded scalar search around
the largest grid peaks.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from models.lti_system import LtiSystem, normalize_r
from numerics.linalg import pd_sqrt
from numerics.options import SolverOptions
from pipeline.factorizations import MFactor, factor_delta, factor_M, factor_nabla
from synthesis.clairvoyant import clairvoyant_cost_many
from utils.config import get_config
from utils.exceptions import EigOnCircle, RankDeficientM
from utils.logging_config import create_structured_logger
from utils.parallel import parallel_map

logger = logging.getLogger(__name__)
metric_log = create_structured_logger(__name__)

METRICS = ("frob_density", "opnorm", "regret", "cr")
CSV_COLUMNS = ("omega", "controller") + METRICS
RANK_TOL = 1e-9
CHUNK = 128


def frequency_grid(size: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(size) / size


def _hermitian(X: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(X, -1, -2))


def _top_eig(X: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (X + _hermitian(X)))[..., -1]


@dataclass
class FrequencyMetrics:
    """Per-frequency curves, refined sup values and Frobenius integrals per controller"""
    system_name: str
    grid: np.ndarray
    curves: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    sups: Dict[str, Dict[str, Tuple[float, float]]] = field(default_factory=dict)
    frobenius: Dict[str, float] = field(default_factory=dict)

    @property
    def controllers(self) -> List[str]:
        return list(self.curves)

    def sup(self, controller: str, metric: str) -> float:
        return self.sups[controller][metric][0]

    def to_frame(self) -> pd.DataFrame:
        names = self.controllers
        k = len(self.grid)
        frame = pd.DataFrame({
            "omega": np.repeat(self.grid, len(names)),
            "controller": np.tile(np.array(names, dtype=object), k),
        })
        for metric in METRICS:
            stacked = np.stack([self.curves[name][metric] for name in names], axis=1)
            frame[metric] = stacked.reshape(-1)
        return frame

    def save_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        logger.info(f"Wrote {len(self.grid)}-point frequency metrics for {len(self.curves)} controllers to {path}")

    def summary_frame(self) -> pd.DataFrame:
        """Squared norms as in the comparison tables, plus unsquared values and maximizers"""
        rows = []
        for name in self.controllers:
            sups = self.sups[name]
            rows.append({
                "system": self.system_name,
                "controller": name,
                "frob_sq": self.frobenius[name],
                "opnorm_sq": sups["opnorm"][0],
                "regret": sups["regret"][0],
                "cr": sups["cr"][0],
                "frob": float(np.sqrt(max(self.frobenius[name], 0.0))),
                "opnorm": float(np.sqrt(max(sups["opnorm"][0], 0.0))),
                "omega_opnorm": sups["opnorm"][1],
                "omega_regret": sups["regret"][1],
                "omega_cr": sups["cr"][1],
            })
        return pd.DataFrame(rows)


class FrequencyEvaluator:
    """
    Evaluates controllers on one plant. The normalized plant, the square
    roots of Q and R and the M factor are computed once and cached.
    """

    def __init__(self, sys: LtiSystem, grid_size: Optional[int] = None,
                 options: Optional[SolverOptions] = None, max_workers: Optional[int] = None):
        config = get_config()
        self.system = sys
        self.normalized = normalize_r(sys)
        self.grid_size = grid_size or config.frequency.grid_size
        self.refine_iterations = config.frequency.refine_iterations
        self.refine_peaks = config.frequency.refine_peaks
        self.options = options or config.solver_options()
        self.max_workers = max_workers
        self.q_sqrt = sys.q_sqrt()
        self.r_sqrt = pd_sqrt(sys.R)
        self._mfactor: Optional[MFactor] = None

    @property
    def mfactor(self) -> MFactor:
        if self._mfactor is None:
            delta = factor_delta(self.normalized, options=self.options)
            nabla = factor_nabla(self.normalized, delta, self.options)
            self._mfactor = factor_M(self.normalized, nabla, self.options)
        return self._mfactor

    @property
    def grid(self) -> np.ndarray:
        return frequency_grid(self.grid_size)

    def transfer_many(self, controller, omegas) -> np.ndarray:
        """T_K at each frequency, shape (len(omegas), n + p, m)"""
        sys = self.system
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        K = controller.evaluate_many(omegas)
        z = np.exp(1j * omegas)
        pencil = z[:, None, None] * np.eye(sys.n)[None] - sys.A[None]
        rhs = sys.B_u[None] @ K + sys.B_w[None]
        try:
            X = np.linalg.solve(pencil, rhs)
        except np.linalg.LinAlgError as e:
            raise EigOnCircle("plant resolvent is singular on the grid") from e
        return np.concatenate([self.q_sqrt[None] @ X, self.r_sqrt[None] @ K], axis=1)

    def densities(self, controller, omegas) -> Dict[str, np.ndarray]:
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        T = self.transfer_many(controller, omegas)
        TT = _hermitian(T) @ T
        clairvoyant = clairvoyant_cost_many(self.system, omegas)
        m_values = self.mfactor.realization.evaluate_many(omegas)
        s = np.linalg.svd(m_values, compute_uv=False)
        bad = s[:, -1] <= RANK_TOL * np.maximum(s[:, 0], np.finfo(float).tiny)
        if np.any(bad):
            omega = float(omegas[np.argmax(bad)])
            raise RankDeficientM("M(e^jw) is rank deficient", {"omega": omega})
        m_inv = self.mfactor.inverse.evaluate_many(omegas)
        return {
            "frob_density": np.real(np.trace(TT, axis1=1, axis2=2)),
            "opnorm": _top_eig(TT),
            "regret": np.maximum(_top_eig(TT - clairvoyant), 0.0),
            "cr": _top_eig(_hermitian(m_inv) @ TT @ m_inv),
        }

    def curves(self, controller) -> Dict[str, np.ndarray]:
        """Densities on the full grid from the [0, pi] half and its mirror image"""
        N = self.grid_size
        grid = self.grid
        half = np.arange(N // 2 + 1)
        chunks = [half[i:i + CHUNK] for i in range(0, len(half), CHUNK)]
        parts = parallel_map(lambda idx: self.densities(controller, grid[idx]), chunks, self.max_workers)
        full_index = np.where(np.arange(N) <= N // 2, np.arange(N), N - np.arange(N))
        out = {}
        for metric in METRICS:
            half_values = np.concatenate([part[metric] for part in parts])
            out[metric] = half_values[full_index]
        return out

    def refine_sup(self, controller, metric: str, values: np.ndarray) -> Tuple[float, float]:
        """Grid maximum refined around the largest local peaks"""
        grid = self.grid
        N = len(grid)
        step = 2.0 * np.pi / N
        best_index = int(np.argmax(values))
        best = (float(values[best_index]), float(grid[best_index]))
        peaks = [k for k in range(N) if values[k] >= values[k - 1] and values[k] >= values[(k + 1) % N]]
        peaks = sorted(peaks, key=lambda k: values[k], reverse=True)[: self.refine_peaks]

        def negative(w: float) -> float:
            return -float(self.densities(controller, [w])[metric][0])

        for k in peaks:
            result = minimize_scalar(negative, bounds=(grid[k] - step, grid[k] + step), method="bounded",
                                     options={"maxiter": self.refine_iterations, "xatol": 1e-12})
            if -result.fun > best[0]:
                best = (float(-result.fun), float(np.mod(result.x, 2.0 * np.pi)))
        return best

    def frobenius(self, values: np.ndarray) -> float:
        """Periodic trapezoid mean with one Richardson step against the even-index subgrid"""
        fine = float(np.mean(values))
        if len(values) % 2:
            return fine
        coarse = float(np.mean(values[::2]))
        return fine + (fine - coarse) / 3.0

    def evaluate(self, controllers: Mapping[str, object]) -> FrequencyMetrics:
        result = FrequencyMetrics(self.system.name, self.grid)
        for name, controller in controllers.items():
            curves = self.curves(controller)
            result.curves[name] = curves
            result.sups[name] = {metric: self.refine_sup(controller, metric, curves[metric])
                                 for metric in ("opnorm", "regret", "cr")}
            result.frobenius[name] = self.frobenius(curves["frob_density"])
            for metric in ("opnorm", "regret", "cr"):
                value, omega = result.sups[name][metric]
                metric_log.log_metric(name, metric, value, omega, system=self.system.name)
            metric_log.log_metric(name, "frobenius", result.frobenius[name], system=self.system.name)
        return result

    def directional_cost(self, controller, omega: float, direction: Optional[np.ndarray] = None) -> float:
        """1/2 v^H T_K^H T_K v: long-run average cost of the sinusoid v sin(omega t)"""
        T = self.transfer_many(controller, [omega])[0]
        v = np.ones(self.system.m) if direction is None else np.asarray(direction, dtype=float)
        y = T @ v
        return 0.5 * float(np.real(np.vdot(y, y)))


def _evaluator(sys: LtiSystem, grid) -> FrequencyEvaluator:
    if isinstance(grid, FrequencyEvaluator):
        return grid
    return FrequencyEvaluator(sys, grid_size=grid)


def transfer_TK(sys: LtiSystem, controller, omega: float) -> np.ndarray:
    return FrequencyEvaluator(sys).transfer_many(controller, [omega])[0]


def metric_frobenius(sys: LtiSystem, controller, grid: Optional[int] = None) -> float:
    evaluator = _evaluator(sys, grid)
    return evaluator.frobenius(evaluator.curves(controller)["frob_density"])


def _metric_sup(sys: LtiSystem, controller, grid, metric: str) -> Tuple[float, float]:
    evaluator = _evaluator(sys, grid)
    return evaluator.refine_sup(controller, metric, evaluator.curves(controller)[metric])


def metric_opnorm(sys: LtiSystem, controller, grid: Optional[int] = None) -> Tuple[float, float]:
    return _metric_sup(sys, controller, grid, "opnorm")


def metric_regret(sys: LtiSystem, controller, grid: Optional[int] = None) -> Tuple[float, float]:
    return _metric_sup(sys, controller, grid, "regret")


def metric_cr(sys: LtiSystem, controller, grid: Optional[int] = None) -> Tuple[float, float]:
    return _metric_sup(sys, controller, grid, "cr")


def evaluate_controllers(sys: LtiSystem, controllers: Mapping[str, object],
                         grid: Optional[int] = None) -> FrequencyMetrics:
    return _evaluator(sys, grid).evaluate(controllers)


def causal_taps(source, size: int = 1024) -> np.ndarray:
    """
    Impulse-response taps h_k (k = 0..size-1, negative lags wrap to the end)
    from grid samples of H(e^jw) = sum_k h_k e^{-jwk}. Accepts a realization
    or a (size, out, in) array of samples.
    """
    if hasattr(source, "evaluate_many"):
        samples = source.evaluate_many(frequency_grid(size))
    else:
        samples = np.asarray(source)
    return np.real(np.fft.ifft(samples, axis=0))


def strictly_causal_norm(source, taps: int = 64, size: int = 1024) -> float:
    """Largest tap norm at lags 1..taps; zero for a purely anticausal response"""
    h = causal_taps(source, size)
    return float(max(np.linalg.norm(h[k]) for k in range(1, taps + 1)))
