"""
Disturbance generators for closed-loop experiments.

Gaussian sequences come from PCG64 generators seeded through a SeedSequence
spawn tree, so trial i of seed s draws the same values on every platform and
regardless of how the draw is split into blocks.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from utils.exceptions import ConfigError, DimensionMismatch, FileExhausted, ModelError

logger = logging.getLogger(__name__)

KINDS = ("gaussian", "sine", "file")


@dataclass
class DisturbanceSpec:
    """
    kind: gaussian (zero mean, identity covariance), sine or file.
    For sine, channel i gets amplitude * sin(omega * t + phases[i]) * direction[i];
    the default applies the same unit sinusoid to every channel.
    """
    kind: str
    horizon: int
    seed: int = 0
    omega: float = 0.0
    amplitude: float = 1.0
    phases: Optional[Sequence[float]] = None
    direction: Optional[Sequence[float]] = None
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown disturbance kind {self.kind!r}", {"choices": KINDS})
        if int(self.horizon) < 1:
            raise ConfigError("disturbance horizon must be at least 1", {"horizon": self.horizon})
        self.horizon = int(self.horizon)
        if self.kind == "sine" and not 0.0 <= self.omega < 2.0 * np.pi:
            raise ConfigError("sine frequency must lie in [0, 2*pi)", {"omega": self.omega})
        if self.kind == "file" and not self.path:
            raise ConfigError("file disturbances need a path")

    @property
    def label(self) -> str:
        if self.kind == "sine":
            return f"sine({self.omega:g})"
        if self.kind == "file":
            return f"file({self.path})"
        return "gaussian"

    def channel_profile(self, m: int):
        """(phases, direction) for m channels"""
        phases = np.zeros(m) if self.phases is None else np.asarray(self.phases, dtype=float).ravel()
        direction = np.ones(m) if self.direction is None else np.asarray(self.direction, dtype=float).ravel()
        if phases.size != m or direction.size != m:
            raise DimensionMismatch("sine phases and direction need one entry per channel",
                                    {"m": m, "phases": phases.size, "direction": direction.size})
        return phases, direction


def read_disturbance_file(path: str, m: int) -> np.ndarray:
    """One row per step; entries separated by whitespace or commas; '#' starts a comment"""
    try:
        frame = pd.read_csv(path, sep=r"[\s,]+", comment="#", header=None, engine="python",
                            skip_blank_lines=True)
    except FileNotFoundError as e:
        raise ModelError(f"disturbance file not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ModelError(f"cannot read disturbance file {path}: {e}") from e
    frame = frame.dropna(axis=1, how="all")
    try:
        values = frame.to_numpy(dtype=float)
    except ValueError as e:
        raise ModelError(f"non-numeric entry in disturbance file {path}") from e
    if values.ndim != 2 or values.shape[1] != m:
        raise DimensionMismatch("disturbance file width does not match the disturbance dimension",
                                {"path": path, "columns": values.shape[-1] if values.size else 0, "m": m})
    if not np.all(np.isfinite(values)):
        raise ModelError(f"disturbance file {path} contains missing or non-finite entries")
    return values


class DisturbanceSource:
    """Sequential block generator for one trial"""

    def __init__(self, spec: DisturbanceSpec, m: int, trial: int = 0, seed: Optional[int] = None):
        self.spec = spec
        self.m = m
        self.trial = trial
        self.position = 0
        self._rng = None
        self._rows = None
        if spec.kind == "gaussian":
            base = spec.seed if seed is None else seed
            self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(base, spawn_key=(trial,))))
        elif spec.kind == "sine":
            self._phases, self._direction = spec.channel_profile(m)
        else:
            self._rows = read_disturbance_file(spec.path, m)

    def block(self, count: int) -> np.ndarray:
        """Next `count` disturbance vectors, shape (count, m)"""
        start, stop = self.position, self.position + count
        spec = self.spec
        if spec.kind == "gaussian":
            out = self._rng.standard_normal((count, self.m))
        elif spec.kind == "sine":
            t = np.arange(start, stop, dtype=float)[:, None]
            out = spec.amplitude * np.sin(spec.omega * t + self._phases[None]) * self._direction[None]
        else:
            if stop > self._rows.shape[0]:
                raise FileExhausted("disturbance file ran out of rows",
                                    {"path": spec.path, "rows": self._rows.shape[0], "requested": stop})
            out = self._rows[start:stop]
        self.position = stop
        return out


def gen_disturbance(spec: DisturbanceSpec, m: int, t: int, trial: int = 0) -> np.ndarray:
    """w_t for one trial"""
    if t < 0:
        raise ValueError("time index must be non-negative")
    if spec.kind == "sine":
        phases, direction = spec.channel_profile(m)
        return spec.amplitude * np.sin(spec.omega * t + phases) * direction
    source = DisturbanceSource(spec, m, trial)
    if spec.kind == "file":
        source.position = t
        return source.block(1)[0]
    return source.block(t + 1)[-1]
