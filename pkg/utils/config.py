import math
import os
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Mapping, Optional

from dotenv import load_dotenv

from numerics.options import SolverOptions
from utils.exceptions import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    """Matrix-equation solver settings"""
    tolerance: float = 1e-12
    max_iterations: int = 200
    acceptance: float = 1e-8
    kron_max_order: int = 30


@dataclass
class FrequencyConfig:
    """Frequency sweep settings"""
    grid_size: int = 1024
    refine_iterations: int = 30
    refine_peaks: int = 3
    rank_grid_size: int = 256


@dataclass
class SimulationConfig:
    """Time-domain experiment settings"""
    steps: int = 100_000
    trials: int = 30
    seed: int = 0
    burn_in: int = 1000
    omega: float = 0.016


@dataclass
class HinfConfig:
    """H-infinity bisection settings"""
    bisection_tol: float = 1e-4
    max_doublings: int = 20


@dataclass
class AppConfig:
    """Application configuration settings"""
    log_level: str = "INFO"
    logs_directory: str = "logs"
    output_directory: str = "output"
    threads: int = 0
    file_logging: bool = False


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


def _coerce(current: Any, value: Any) -> Any:
    """Convert a textual override to the type of the current field value"""
    if not isinstance(value, str):
        return value
    if isinstance(current, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(float(value))
    if isinstance(current, float):
        return float(value)
    return value


class Config:
    """
    Centralized configuration for solvers, sweeps, simulations and the CLI
    """

    SECTIONS = ("solver", "frequency", "simulation", "hinf", "app")

    def __init__(self):
        self._load_config()
        logger.debug("Configuration loaded")

    def _load_config(self):
        """Load configuration from environment variables"""
        try:
            tolerance = float(os.getenv("COMPET_CTL_TOL", "1e-12"))
            self.solver = SolverConfig(
                tolerance=tolerance,
                max_iterations=int(os.getenv("COMPET_CTL_MAX_ITER", "200")),
                acceptance=float(os.getenv("COMPET_CTL_ACCEPT", str(max(1e-8, tolerance)))),
                kron_max_order=int(os.getenv("COMPET_CTL_KRON_MAX", "30")),
            )
            self.frequency = FrequencyConfig(
                grid_size=int(os.getenv("COMPET_CTL_GRID", "1024")),
                refine_iterations=int(os.getenv("COMPET_CTL_REFINE_ITER", "30")),
                refine_peaks=int(os.getenv("COMPET_CTL_REFINE_PEAKS", "3")),
                rank_grid_size=int(os.getenv("COMPET_CTL_RANK_GRID", "256")),
            )
            self.simulation = SimulationConfig(
                steps=int(os.getenv("COMPET_CTL_STEPS", "100000")),
                trials=int(os.getenv("COMPET_CTL_TRIALS", "30")),
                seed=int(os.getenv("COMPET_CTL_SEED", "0")),
                burn_in=int(os.getenv("COMPET_CTL_BURN_IN", "1000")),
                omega=float(os.getenv("COMPET_CTL_OMEGA", "0.016")),
            )
            self.hinf = HinfConfig(
                bisection_tol=float(os.getenv("COMPET_CTL_HINF_TOL", "1e-4")),
                max_doublings=int(os.getenv("COMPET_CTL_HINF_DOUBLINGS", "20")),
            )
            self.app = AppConfig(
                log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
                logs_directory=os.getenv("LOGS_DIRECTORY", "logs"),
                output_directory=os.getenv("OUTPUT_DIRECTORY", "output"),
                threads=int(os.getenv("COMPET_CTL_THREADS", "0")),
                file_logging=_env_bool("COMPET_CTL_FILE_LOGGING", "false"),
            )
        except ValueError as e:
            raise ConfigError(f"Invalid environment setting: {e}") from e

    def validate_config(self) -> Dict[str, Any]:
        """
        Check every section; returns {"valid", "errors", "warnings", "checks"}
        """
        errors: List[str] = []
        warnings: List[str] = []
        checks: Dict[str, str] = {}

        try:
            self.solver_options()
            checks["solver"] = "ok"
        except ConfigError as e:
            errors.append(str(e))

        grid, sim = self.frequency.grid_size, self.simulation
        rules = [
            ("grid_size", grid >= 8 and grid % 2 == 0, "grid_size must be an even number >= 8"),
            ("simulation", sim.steps >= 1 and sim.trials >= 1 and sim.burn_in >= 0,
             "steps and trials must be >= 1, burn_in >= 0"),
            ("omega", 0.0 <= sim.omega < 2 * math.pi, f"omega must lie in [0, 2pi), got {sim.omega}"),
            ("hinf", 0 < self.hinf.bisection_tol < 1, "bisection_tol must lie in (0, 1)"),
            ("threads", self.app.threads >= 0, "threads must be >= 0 (0 = auto)"),
        ]
        for name, passed, message in rules:
            if passed:
                checks[name] = "ok"
            else:
                errors.append(message)
        if "threads" in checks:
            checks["threads"] = "auto" if self.app.threads == 0 else str(self.app.threads)

        if grid < 256:
            warnings.append("grid_size below 256 may miss narrow peaks")
        if sim.trials == 1:
            warnings.append("a single trial gives no standard error")

        return {"valid": not errors, "errors": errors, "warnings": warnings, "checks": checks}

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            tolerance=self.solver.tolerance,
            max_iterations=self.solver.max_iterations,
            acceptance=self.solver.acceptance,
            kron_max_order=self.solver.kron_max_order,
        )

    def thread_count(self) -> int:
        if self.app.threads > 0:
            return self.app.threads
        return os.cpu_count() or 1

    def update_config(self, section: str, key: str, value: Any) -> bool:
        """
        Update a configuration value dynamically
        """
        target = getattr(self, section, None) if section in self.SECTIONS else None
        if target is None or not hasattr(target, key):
            logger.warning(f"Invalid config section.key: {section}.{key}")
            return False
        try:
            setattr(target, key, _coerce(getattr(target, key), value))
        except ValueError as e:
            raise ConfigError(f"Bad value for {section}.{key}: {value!r}") from e
        if section == "solver" and key == "tolerance" and target.tolerance > target.acceptance:
            # a looser target drags the hard bound along
            logger.info(f"Raising solver.acceptance to the tolerance {target.tolerance:g}")
            target.acceptance = target.tolerance
        logger.debug(f"Updated {section}.{key}")
        return True

    def apply_overrides(self, overrides: Mapping[str, Any]) -> None:
        """
        Apply `section.key` or bare `key` overrides (run-config files, CLI flags)
        """
        for name, value in overrides.items():
            if value is None:
                continue
            if "." in name:
                section, key = name.split(".", 1)
                if not self.update_config(section, key, value):
                    raise ConfigError(f"Unknown configuration key {name}")
                continue
            owners = [s for s in self.SECTIONS if hasattr(getattr(self, s), name)]
            if not owners:
                raise ConfigError(f"Unknown configuration key {name}")
            self.update_config(owners[0], name, value)

    def get_config_summary(self) -> Dict[str, Any]:
        """
        Get a summary of current configuration
        """
        return {
            "solver": {"tolerance": self.solver.tolerance, "acceptance": self.solver.acceptance},
            "frequency": {"grid_size": self.frequency.grid_size},
            "simulation": {"steps": self.simulation.steps, "trials": self.simulation.trials,
                           "seed": self.simulation.seed},
            "app": {"log_level": self.app.log_level, "threads": self.thread_count()},
        }

    def export_config(self) -> Dict[str, Any]:
        """
        Export configuration as dictionary
        """
        return {section: asdict(getattr(self, section)) for section in self.SECTIONS}


# Global configuration instance
_config_instance: Optional[Config] = None


def get_config() -> Config:
    """
    Get the global configuration instance
    """
    global _config_instance
    if _config_instance is None:
        _config_instance = Config()
    return _config_instance


def reload_config() -> Config:
    """
    Reload the configuration from environment variables
    """
    global _config_instance
    _config_instance = Config()
    return _config_instance
