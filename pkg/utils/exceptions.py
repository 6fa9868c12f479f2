from typing import Any, Dict, Optional


class CompetCtlError(Exception):
    """Base class for every error raised by the library"""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = dict(context or {})

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({details})"


class ConfigError(CompetCtlError):
    pass


# Numerics

class NumericsError(CompetCtlError):
    pass


class NoStabilizingSolution(NumericsError):
    pass


class UnstableCoefficient(NumericsError):
    pass


class UnstableProduct(NumericsError):
    pass


class NotPsd(NumericsError):
    pass


class NotPd(NumericsError):
    pass


class Singular(NumericsError):
    pass


class DimensionMismatch(NumericsError):
    pass


class ResidualTooLarge(NumericsError):
    pass


# Model

class ModelError(CompetCtlError):
    pass


class ParseError(ModelError):
    """Malformed system, controller or run-config file"""

    def __init__(self, message: str, line: int = 0, column: int = 0, path: Optional[str] = None):
        context: Dict[str, Any] = {}
        if path:
            context["path"] = path
        if line:
            context["line"] = line
            context["column"] = column
        super().__init__(message, context)
        self.line = line
        self.column = column
        self.path = path


class RankDeficientBw(ModelError):
    pass


class EigOnCircle(ModelError):
    pass


class ValidationFailed(ModelError):
    """Raised when a plant fails the standing assumptions"""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


# Synthesis

class SynthesisError(CompetCtlError):
    pass


class RiccatiFailure(SynthesisError):
    pass


class UpstreamRiccatiFailure(SynthesisError):
    pass


class DegenerateHankel(SynthesisError):
    pass


class InfeasibleAtUpperBound(SynthesisError):
    pass


class UnsupportedWeight(SynthesisError):
    pass


class RankDeficientM(SynthesisError):
    pass


class UnsupportedMethod(SynthesisError):
    pass


# Simulation

class SimulationError(CompetCtlError):
    pass


class UnstableLoop(SimulationError):
    pass


class NonFiniteState(SimulationError):
    pass


class FileExhausted(SimulationError):
    pass


class UnsupportedController(SimulationError):
    pass
