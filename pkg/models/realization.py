"""
State-space realizations of transfer functions on the unit circle.

TransferRealization stores (A, B, C, D) together with a causality flag.
Anticausal responses are stored as causal realizations in the conjugate
variable zeta = 1/z, so one evaluation kernel serves both.

ControllerRealization is a strictly causal map w -> u, kept in the
state-feedback form (internal state driven by b_t = B_w w_t) and in the
plain transfer form (Ak, Bk, Ck).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from numerics.linalg import spectral_radius, solve_linear
from utils.exceptions import DimensionMismatch, EigOnCircle

logger = logging.getLogger(__name__)

CAUSALITIES = ("causal", "strictly_causal", "anticausal", "strictly_anticausal")
POLE_TOL = 1e-12


def _as2d(x, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != 2:
        arr = arr.reshape(rows if rows is not None else -1, cols if cols is not None else -1)
    return arr


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


def evaluate_state_space(A, B, C, D, points: np.ndarray) -> np.ndarray:
    """D + C (z I - A)^-1 B at each complex point, shape (len(points), out, in)"""
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    out, inp = D.shape
    if A.shape[0] == 0:
        return np.broadcast_to(D.astype(complex), (points.size, out, inp)).copy()
    poles = np.linalg.eigvals(A)
    gap = np.min(np.abs(points[:, None] - poles[None, :]))
    if gap < POLE_TOL * max(1.0, np.max(np.abs(poles))):
        raise EigOnCircle("evaluation point coincides with a pole", {"gap": float(gap)})
    n = A.shape[0]
    pencil = points[:, None, None] * np.eye(n)[None] - A[None]
    rhs = np.broadcast_to(B.astype(complex), (points.size, n, inp))
    return D[None] + C[None] @ np.linalg.solve(pencil, rhs)


@dataclass(frozen=True)
class TransferRealization:
    """D + C (s I - A)^-1 B with s = z (causal) or s = 1/z (anticausal)"""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    causality: str = "causal"

    def __post_init__(self):
        if self.causality not in CAUSALITIES:
            raise ValueError(f"unknown causality {self.causality!r}")
        D = _as2d(self.D)
        out, inp = D.shape
        A = _as2d(self.A)
        n = A.shape[0] if A.size else 0
        A = A.reshape(n, n)
        B = _as2d(self.B, n, inp)
        C = _as2d(self.C, out, n)
        if B.shape != (n, inp) or C.shape != (out, n):
            raise DimensionMismatch("inconsistent realization shapes",
                                    {"A": A.shape, "B": B.shape, "C": C.shape, "D": D.shape})
        if self.causality.startswith("strictly") and np.any(D != 0):
            raise ValueError(f"{self.causality} realization requires D = 0")
        _freeze(A, B, C, D)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @classmethod
    def static(cls, D, causality: str = "causal") -> "TransferRealization":
        D = _as2d(D)
        return cls(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D, causality)

    @classmethod
    def zero(cls, out: int, inp: int, causality: str = "strictly_causal") -> "TransferRealization":
        return cls.static(np.zeros((out, inp)), causality)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def shape(self):
        return self.D.shape

    @property
    def is_anticausal(self) -> bool:
        return self.causality.endswith("anticausal")

    def is_stable(self) -> bool:
        return spectral_radius(self.A) < 1.0

    def evaluate_many(self, omegas) -> np.ndarray:
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        sign = -1.0 if self.is_anticausal else 1.0
        return evaluate_state_space(self.A, self.B, self.C, self.D, np.exp(sign * 1j * omegas))

    def evaluate(self, omega: float) -> np.ndarray:
        return self.evaluate_many([omega])[0]

    def markov(self, k: int) -> np.ndarray:
        """k-th impulse-response tap in the realization's own variable"""
        if k == 0:
            return self.D.copy()
        if self.n_states == 0:
            return np.zeros(self.shape)
        return self.C @ np.linalg.matrix_power(self.A, k - 1) @ self.B

    def _family(self) -> str:
        return "anticausal" if self.is_anticausal else "causal"

    def _combined_causality(self, other: "TransferRealization", strict: bool) -> str:
        if self._family() != other._family():
            raise ValueError("cannot combine causal and anticausal realizations")
        prefix = "strictly_" if strict else ""
        return prefix + self._family()

    def series(self, other: "TransferRealization") -> "TransferRealization":
        """self(z) @ other(z): other's output drives self"""
        if self.shape[1] != other.shape[0]:
            raise DimensionMismatch(f"series shape mismatch {self.shape} after {other.shape}")
        strict = self.causality.startswith("strictly") or other.causality.startswith("strictly")
        causality = self._combined_causality(other, strict)
        n1, n2 = other.n_states, self.n_states
        A = np.block([[other.A, np.zeros((n1, n2))],
                      [self.B @ other.C, self.A]])
        B = np.vstack([other.B, self.B @ other.D])
        C = np.hstack([self.D @ other.C, self.C])
        D = self.D @ other.D
        return TransferRealization(A, B, C, D, causality)

    def parallel(self, other: "TransferRealization") -> "TransferRealization":
        """self(z) + other(z)"""
        if self.shape != other.shape:
            raise DimensionMismatch(f"parallel shape mismatch {self.shape} vs {other.shape}")
        strict = self.causality.startswith("strictly") and other.causality.startswith("strictly")
        causality = self._combined_causality(other, strict)
        n1, n2 = self.n_states, other.n_states
        A = np.block([[self.A, np.zeros((n1, n2))],
                      [np.zeros((n2, n1)), other.A]])
        B = np.vstack([self.B, other.B])
        C = np.hstack([self.C, other.C])
        return TransferRealization(A, B, C, self.D + other.D, causality)

    def inverse(self) -> "TransferRealization":
        """Inverse through an invertible feedthrough; state matrix becomes A - B D^-1 C"""
        if self.shape[0] != self.shape[1]:
            raise DimensionMismatch("only square realizations can be inverted")
        D_inv = solve_linear(self.D, np.eye(self.shape[0]))
        return TransferRealization(self.A - self.B @ D_inv @ self.C, self.B @ D_inv,
                                   -D_inv @ self.C, D_inv, self._family())

    def scale_left(self, L) -> "TransferRealization":
        L = _as2d(L)
        return TransferRealization(self.A, self.B, L @ self.C, L @ self.D, self.causality)

    def scale_right(self, Rm) -> "TransferRealization":
        Rm = _as2d(Rm)
        return TransferRealization(self.A, self.B @ Rm, self.C, self.D @ Rm, self.causality)


@dataclass
class ControllerRealization:
    """
    Strictly causal controller w -> u.

    Feedback form:  xi_{t+1} = Ac xi_t + Bc b_t,  u_t = Cc xi_t + Dx x_t,
    where b_t = B_w w_t = x_{t+1} - A x_t - B_u u_t is reconstructed from states.
    Transfer form:  eta_{t+1} = Ak eta_t + Bk w_t,  u_t = Ck eta_t.
    """
    kind: str
    Ak: np.ndarray
    Bk: np.ndarray
    Ck: np.ndarray
    Ac: Optional[np.ndarray] = None
    Bc: Optional[np.ndarray] = None
    Cc: Optional[np.ndarray] = None
    Dx: Optional[np.ndarray] = None
    method: str = ""
    metadata: Dict[str, str] = field(default_factory=dict)

    realizable = True

    def __post_init__(self):
        if self.kind not in ("feedback", "transfer"):
            raise ValueError(f"controller kind must be feedback or transfer, got {self.kind!r}")
        if self.kind == "feedback" and any(x is None for x in (self.Ac, self.Bc, self.Cc, self.Dx)):
            raise ValueError("feedback controllers need Ac, Bc, Cc and Dx")
        nk = self.Ak.shape[0]
        if self.Ak.shape != (nk, nk) or self.Bk.shape[0] != nk or self.Ck.shape[1] != nk:
            raise DimensionMismatch("inconsistent transfer-form shapes",
                                    {"Ak": self.Ak.shape, "Bk": self.Bk.shape, "Ck": self.Ck.shape})
        if self.kind == "feedback":
            nc = self.Ac.shape[0]
            n = self.Dx.shape[1]
            if (self.Ac.shape != (nc, nc) or self.Bc.shape != (nc, n)
                    or self.Cc.shape != (self.Dx.shape[0], nc)):
                raise DimensionMismatch("inconsistent feedback-form shapes",
                                        {"Ac": self.Ac.shape, "Bc": self.Bc.shape,
                                         "Cc": self.Cc.shape, "Dx": self.Dx.shape})

    @classmethod
    def from_feedback(cls, A, B_u, B_w, Ac, Bc, Cc, Dx, method: str = "") -> "ControllerRealization":
        """
        Build both forms; the transfer form is the closed loop of plant and
        controller with states (x, xi) driven by w.
        """
        A, B_u, B_w = (np.asarray(v, dtype=float) for v in (A, B_u, B_w))
        Ac, Bc, Cc, Dx = (np.asarray(v, dtype=float) for v in (Ac, Bc, Cc, Dx))
        n, nc = A.shape[0], Ac.shape[0]
        Bc = Bc.reshape(nc, n)
        Cc = Cc.reshape(Dx.shape[0], nc)
        Ak = np.block([[A + B_u @ Dx, B_u @ Cc],
                       [np.zeros((nc, n)), Ac]])
        Bk = np.vstack([B_w, Bc @ B_w])
        Ck = np.hstack([Dx, Cc])
        return cls("feedback", Ak, Bk, Ck, Ac, Bc, Cc, Dx, method)

    @classmethod
    def static_feedback(cls, A, B_u, B_w, K, method: str = "") -> "ControllerRealization":
        """u = -K x"""
        n = A.shape[0]
        return cls.from_feedback(A, B_u, B_w, np.zeros((0, 0)), np.zeros((0, n)),
                                 np.zeros((K.shape[0], 0)), -np.asarray(K, dtype=float), method)

    @classmethod
    def from_transfer(cls, Ak, Bk, Ck, method: str = "", p: Optional[int] = None,
                      m: Optional[int] = None) -> "ControllerRealization":
        """p and m are only needed for a zero-state controller (u = 0)"""
        Ak = np.asarray(Ak, dtype=float)
        Bk = np.asarray(Bk, dtype=float)
        Ck = np.asarray(Ck, dtype=float)
        nk = Ak.shape[0] if Ak.size else 0
        if nk == 0:
            m = m if m is not None else (Bk.shape[1] if Bk.ndim == 2 else 0)
            p = p if p is not None else (Ck.shape[0] if Ck.ndim == 2 else 0)
            return cls("transfer", np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), method=method)
        return cls("transfer", Ak.reshape(nk, nk), Bk.reshape(nk, -1), Ck.reshape(-1, nk), method=method)

    @property
    def p(self) -> int:
        return self.Ck.shape[0]

    @property
    def m(self) -> int:
        return self.Bk.shape[1]

    @property
    def n_states(self) -> int:
        return self.Ac.shape[0] if self.kind == "feedback" else self.Ak.shape[0]

    def closed_loop_radius(self) -> float:
        return spectral_radius(self.Ak)

    def evaluate_many(self, omegas) -> np.ndarray:
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        return evaluate_state_space(self.Ak, self.Bk, self.Ck, np.zeros((self.p, self.m)),
                                    np.exp(1j * omegas))

    def evaluate(self, omega: float) -> np.ndarray:
        return self.evaluate_many([omega])[0]

    def map_output(self, L: np.ndarray) -> "ControllerRealization":
        """Left-multiply the control output, e.g. by R^{-1/2} to undo input normalization"""
        L = np.asarray(L, dtype=float)
        if self.kind == "feedback":
            return ControllerRealization("feedback", self.Ak, self.Bk, L @ self.Ck,
                                         self.Ac, self.Bc, L @ self.Cc, L @ self.Dx,
                                         self.method, dict(self.metadata))
        return ControllerRealization("transfer", self.Ak, self.Bk, L @ self.Ck,
                                     method=self.method, metadata=dict(self.metadata))

    def with_plant_input(self, A, B_u, B_w) -> "ControllerRealization":
        """Rebuild the transfer form against a plant with a different B_u (same u coordinates)"""
        if self.kind != "feedback":
            return self
        return ControllerRealization.from_feedback(A, B_u, B_w, self.Ac, self.Bc, self.Cc, self.Dx,
                                                   self.method)
