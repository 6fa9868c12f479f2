from dataclasses import dataclass, replace

from utils.exceptions import ConfigError


@dataclass(frozen=True)
class SolverOptions:
    """
    Iteration controls shared by the Riccati, Lyapunov and Sylvester solvers.

    tolerance is the target relative residual; a solution above it is still
    returned (with a warning) as long as it stays within acceptance.
    """
    tolerance: float = 1e-12
    max_iterations: int = 200
    acceptance: float = 1e-8
    kron_max_order: int = 30

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.acceptance < self.tolerance:
            raise ConfigError("acceptance must not be tighter than tolerance",
                              {"tolerance": self.tolerance, "acceptance": self.acceptance})
        if self.kron_max_order < 0:
            raise ConfigError(f"kron_max_order must be >= 0, got {self.kron_max_order}")

    def with_(self, **changes) -> "SolverOptions":
        return replace(self, **changes)


DEFAULT_OPTIONS = SolverOptions()
