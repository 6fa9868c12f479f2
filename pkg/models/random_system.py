import logging

import numpy as np

from models.lti_system import LtiSystem
from utils.exceptions import ModelError

logger = logging.getLogger(__name__)

CIRCLE_MARGIN = 0.05
MAX_ATTEMPTS = 200


def _stabilizable(A: np.ndarray, B: np.ndarray) -> bool:
    """PBH test on the eigenvalues outside the open unit disc"""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0:
            pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
            s = np.linalg.svd(pencil, compute_uv=False)
            if s[-1] <= 1e-8 * s[0]:
                return False
    return True


def _random_pd(rng: np.random.Generator, k: int) -> np.ndarray:
    X = rng.standard_normal((k, k))
    return X @ X.T / k + 0.5 * np.eye(k)


def make_random_system(n: int, p: int, m: int, seed: int = 0, unstable: bool = True,
                       name: str = "") -> LtiSystem:
    """
    Random plant with standard-normal A scaled to a spectral radius in
    [1.1, 1.6] (unstable) or [0.3, 0.9] (stable), stabilizable (A, B_u),
    full-rank B_w, Q and R positive definite and no eigenvalue of A within
    0.05 of the unit circle.
    """
    if n < 1 or p < 1 or m < 1:
        raise ModelError("dimensions must be positive", {"n": n, "p": p, "m": m})
    if m > n:
        raise ModelError("B_w cannot have full column rank with m > n", {"n": n, "m": m})

    rng = np.random.default_rng(seed)
    for attempt in range(1, MAX_ATTEMPTS + 1):
        A = rng.standard_normal((n, n))
        rho = np.max(np.abs(np.linalg.eigvals(A)))
        target = rng.uniform(1.1, 1.6) if unstable else rng.uniform(0.3, 0.9)
        A = A * (target / rho)
        eigs = np.abs(np.linalg.eigvals(A))
        if np.min(np.abs(eigs - 1.0)) < CIRCLE_MARGIN:
            continue
        B_u = rng.standard_normal((n, p))
        B_w = rng.standard_normal((n, m))
        if np.linalg.matrix_rank(B_w) < m or not _stabilizable(A, B_u):
            continue
        system = LtiSystem(A, B_u, B_w, _random_pd(rng, n), _random_pd(rng, p),
                           name=name or f"random_n{n}_p{p}_m{m}_s{seed}")
        logger.debug(f"Generated {system.name} after {attempt} attempts (rho={np.max(eigs):.3f})")
        return system
    raise ModelError("could not draw a valid random system", {"seed": seed, "attempts": MAX_ATTEMPTS})
