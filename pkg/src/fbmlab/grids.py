"""Uniform time grids, Hurst parameters and reproducible per-path RNG streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BROWNIAN_H = 0.5

_GRID_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class HurstParameter:
    """Memory exponent of the driving Gaussian noise.

    The long-range dependent regime is 0.5 < h < 1.  h = 0.5 is additionally
    admitted as the Brownian special case and flagged via ``is_brownian``.
    """

    h: float

    def __post_init__(self):
        if not (BROWNIAN_H <= self.h < 1.0):
            raise ValueError(f"Hurst parameter must lie in [0.5, 1), got {self.h}")

    @property
    def is_brownian(self) -> bool:
        return self.h == BROWNIAN_H

    @property
    def two_h(self) -> float:
        return 2.0 * self.h


def as_hurst(h) -> HurstParameter:
    """Coerce a float or HurstParameter into a validated HurstParameter."""
    if isinstance(h, HurstParameter):
        return h
    return HurstParameter(float(h))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, horizon] with t_i = i * horizon / steps."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @property
    def spacing(self) -> float:
        return self.horizon / self.steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def index_of(self, t: float) -> int:
        """Grid index of a time that must sit (numerically) on the grid."""
        i = int(round(t / self.spacing))
        if i < 0 or i > self.steps or abs(i * self.spacing - t) > _GRID_SNAP_TOL * max(1.0, self.horizon):
            raise ValueError(f"time {t} is not a point of {self}")
        return i

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)

    def is_refinement_of(self, other: "TimeGrid") -> bool:
        return self.horizon == other.horizon and self.steps % other.steps == 0


def path_rng(master_seed: int, path_index: int, lane: int = 0) -> np.random.Generator:
    """Independent stream for one sample path.

    Streams are keyed by (master seed, path index) so a batch gives identical
    draws regardless of how paths are scheduled across workers.  ``lane``
    separates draws made for different purposes on the same path (e.g. path
    generation vs midpoint refinement), which would otherwise replay each
    other's normals.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(path_index), int(lane)))
    return np.random.default_rng(ss)
