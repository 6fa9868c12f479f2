import os
import sys
import time
import logging
import logging.handlers
from datetime import date
from typing import Dict, List, Optional

PACKAGE_LOGGERS = (
    "numerics", "models", "pipeline", "synthesis", "freqeval", "sim",
    "utils", "cli", "run_workflow",
)
NOISY_LOGGERS = ("langgraph", "matplotlib", "numexpr", "asyncio")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# name -> setup_logging keyword arguments
PRESETS: Dict[str, dict] = {
    "development": {"log_level": "DEBUG", "enable_file": True},
    "production": {"log_level": "INFO", "enable_console": False, "enable_file": True,
                   "max_bytes": 50 << 20, "backup_count": 10},
    "testing": {"log_level": "WARNING"},
}


def _resolve_level(log_level: Optional[str]) -> int:
    name = (log_level or os.getenv("LOG_LEVEL", "INFO")).upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        raise ValueError(f"Invalid log level: {name}")
    return level


def _file_handler(log_file: Optional[str], logs_directory: Optional[str], max_bytes: int,
                  backup_count: int) -> Optional[logging.Handler]:
    if log_file is None:
        directory = logs_directory or os.getenv("LOGS_DIRECTORY", "logs")
        log_file = os.path.join(directory, f"compet_ctl_{date.today():%Y%m%d}.log")
    try:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        return logging.handlers.RotatingFileHandler(log_file, maxBytes=max_bytes,
                                                    backupCount=backup_count, encoding="utf-8")
    except OSError as e:
        print(f"file logging disabled, cannot open {log_file}: {e}", file=sys.stderr)
        return None


def setup_logging(
    log_level: Optional[str] = None,
    log_file: Optional[str] = None,
    max_bytes: int = 10 << 20,
    backup_count: int = 5,
    enable_console: bool = True,
    enable_file: bool = False,
    logs_directory: Optional[str] = None,
) -> None:
    """
    Replace the root handlers with a stderr console handler and, when
    enable_file is set, a rotating file under the logs directory.

    Args:
        log_level: level name; LOG_LEVEL from the environment when omitted
        log_file: explicit log file (default logs/compet_ctl_<date>.log)
        max_bytes: rotation size of the log file
        backup_count: rotated files kept
        enable_console: log to stderr
        enable_file: log to the rotating file
        logs_directory: directory for the default log file (LOGS_DIRECTORY)
    """
    level = _resolve_level(log_level)
    root = logging.getLogger()
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handlers: List[logging.Handler] = []
    if enable_console:
        handlers.append(logging.StreamHandler(sys.stderr))
    if enable_file:
        handler = _file_handler(log_file, logs_directory, max_bytes, backup_count)
        if handler is not None:
            handlers.append(handler)

    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
        root.addHandler(handler)

    _setup_module_loggers(level)
    _suppress_noisy_loggers()
    root.debug(f"Logging at {logging.getLevelName(level)} with {len(handlers)} handler(s)")


def setup_preset(name: str) -> None:
    if name not in PRESETS:
        raise ValueError(f"unknown logging preset {name!r}; choose from {sorted(PRESETS)}")
    setup_logging(**PRESETS[name])


def _setup_module_loggers(level: int) -> None:
    for name in PACKAGE_LOGGERS:
        logging.getLogger(name).setLevel(level)


def _suppress_noisy_loggers() -> None:
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


class StructuredLogger:
    """
    Wraps a logger and attaches the solver, synthesis and metric fields of
    each record as `extra` attributes, so handlers can filter on them.
    """

    def __init__(self, name: str):
        self.logger = logging.getLogger(name)

    def _emit(self, level: int, message: str, fields: dict) -> None:
        self.logger.log(level, message, extra=fields)

    def log_solver_call(self, solver: str, iterations: int, residual: float, converged: bool = True, **kwargs):
        state = "converged" if converged else "failed"
        self._emit(logging.DEBUG if converged else logging.ERROR,
                   f"Solver {solver} {state} after {iterations} iterations (residual {residual:.2e})",
                   {"solver": solver, "iterations": iterations, "residual": residual,
                    "converged": converged, **kwargs})

    def log_synthesis_step(self, step_name: str, status: str, duration: Optional[float] = None, **kwargs):
        timing = f" in {duration:.2f}s" if duration else ""
        self._emit(logging.ERROR if status == "failed" else logging.INFO,
                   f"Step '{step_name}' {status}{timing}",
                   {"synthesis_step": step_name, "status": status, "duration_seconds": duration, **kwargs})

    def log_metric(self, controller: str, metric: str, value: float, omega: Optional[float] = None, **kwargs):
        where = "" if omega is None else f" at omega={omega:.6f}"
        self._emit(logging.INFO, f"{controller}: {metric} = {value:.10g}{where}",
                   {"controller": controller, "metric": metric, "value": value, "omega": omega, **kwargs})


def create_structured_logger(name: str) -> StructuredLogger:
    return StructuredLogger(name)


class LogTimer:
    """Logs start, completion time or failure of the wrapped block; `duration` holds seconds"""

    def __init__(self, logger: logging.Logger, operation: str, level: int = logging.INFO):
        self.logger = logger
        self.operation = operation
        self.level = level
        self.duration = 0.0
        self._start = 0.0

    def __enter__(self) -> "LogTimer":
        self._start = time.perf_counter()
        self.logger.log(self.level, f"Starting {self.operation}")
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        self.duration = time.perf_counter() - self._start
        if exc_type is None:
            self.logger.log(self.level, f"Completed {self.operation} in {self.duration:.2f}s")
        else:
            self.logger.error(f"Failed {self.operation} after {self.duration:.2f}s: {exc}")
        return False
