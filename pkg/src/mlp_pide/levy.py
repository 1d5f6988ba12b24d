"""Levy measures with truncation of small jumps.

For a truncation level ``delta`` the measure is restricted to
``A_delta = {z : |z| >= delta}``. Marks are drawn from the normalized
restriction and jump counts over an interval of length ``dt`` are
Poisson with mean ``mass_above(delta) * dt``.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from .randomness import StreamKey, poisson, uniforms


class DegenerateTruncationError(ValueError):
    """The truncated measure has zero mass, so it cannot be normalized."""


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"truncation level must lie in (0, 1), got {delta}")


def log_unit_ball_volume(d: int) -> float:
    return d / 2 * math.log(math.pi) - math.lgamma(d / 2 + 1)


def unit_ball_volume(d: int) -> float:
    return math.exp(log_unit_ball_volume(d))


class LevyMeasure(ABC):
    """Contract for a Levy measure on R^d usable by the Euler scheme."""

    family: str = "abstract"

    def __init__(self, d: int):
        if d < 1:
            raise ValueError(f"invalid dimension d={d}")
        self.d = d

    @abstractmethod
    def mass_above(self, delta: float) -> float:
        """nu({z : |z| >= delta})."""

    @abstractmethod
    def sample_marks(
        self, delta: float, key: StreamKey, count: int
    ) -> tuple[np.ndarray, int]:
        """First ``count`` marks of the stream ``key``, distributed as nu_delta.

        Returns the ``(count, d)`` array and the number of scalar uniforms
        consumed to produce it. The marks are prefix-consistent: asking for
        fewer marks returns a prefix of a larger request.
        """

    def truncated_first_moment(self, delta: float) -> np.ndarray:
        """Integral of z over A_delta; only needed by exact-compensator references."""
        raise NotImplementedError(f"{self.family} has no closed-form first moment")

    def describe(self) -> dict:
        return {"family": self.family, "d": self.d}


class UniformCubeMeasure(LevyMeasure):
    """nu(dz) = intensity * 1_{[0,1]^d}(z) dz.

    Marks are drawn by rejection: propose uniformly on the cube and keep
    proposals with norm at least ``delta``.
    """

    family = "uniform-cube"

    def __init__(self, d: int, intensity: float):
        super().__init__(d)
        if intensity < 0:
            raise ValueError(f"intensity must be nonnegative, got {intensity}")
        self.intensity = float(intensity)

    def _corner_ball_volume(self, delta: float) -> float:
        # the ball of radius delta < 1 meets [0,1]^d in one orthant
        # log space: the gamma function overflows long before the volume underflows
        d = self.d
        return math.exp(log_unit_ball_volume(d) + d * math.log(delta / 2))

    def acceptance_rate(self, delta: float) -> float:
        _check_delta(delta)
        return 1.0 - self._corner_ball_volume(delta)

    def mass_above(self, delta: float) -> float:
        _check_delta(delta)
        return self.intensity * self.acceptance_rate(delta)

    def truncated_first_moment(self, delta: float) -> np.ndarray:
        _check_delta(delta)
        d = self.d
        # int over the orthant ball of z_1 = V_{d-1} delta^{d+1} / ((d+1) 2^{d-1})
        corner = math.exp(log_unit_ball_volume(d - 1) + (d + 1) * math.log(delta)
                          - (d - 1) * math.log(2) - math.log(d + 1))
        return np.full(d, self.intensity * (0.5 - corner))

    def propose(self, key: StreamKey, start: int, count: int) -> np.ndarray:
        """Proposals ``start .. start+count-1``; proposal j uses uniforms j*d .. j*d+d-1."""
        return uniforms(key, start * self.d, count * self.d).reshape(count, self.d)

    def sample_marks(self, delta, key, count):
        if self.mass_above(delta) <= 0:
            raise DegenerateTruncationError(
                f"uniform-cube measure has no mass above delta={delta}"
            )
        if count <= 0:
            return np.empty((0, self.d)), 0
        rate = self.acceptance_rate(delta)
        kept = []
        n_kept = 0
        start = 0
        used = 0
        while n_kept < count:
            need = count - n_kept
            batch = int(math.ceil(need / rate * 1.05)) + 8
            prop = self.propose(key, start, batch)
            ok = np.einsum("ij,ij->i", prop, prop) >= delta * delta
            idx = np.flatnonzero(ok)
            if idx.size >= need:
                idx = idx[:need]
                used = start + idx[-1] + 1
            kept.append(prop[idx])
            n_kept += idx.size
            start += batch
        return np.concatenate(kept), int(used) * self.d

    def describe(self):
        return {"family": self.family, "d": self.d, "intensity": self.intensity}


def mass_above(measure: LevyMeasure, delta: float) -> float:
    return measure.mass_above(delta)


def sample_mark(
    measure: LevyMeasure, delta: float, key: StreamKey, counter: int
) -> np.ndarray:
    """The ``counter``-th mark of stream ``key``."""
    marks, _ = measure.sample_marks(delta, key, counter + 1)
    return marks[counter]


def sample_jump_count(
    measure: LevyMeasure, delta: float, dt: float, key: StreamKey, counter: int
) -> int:
    if dt < 0:
        raise ValueError(f"negative time increment {dt}")
    lam = measure.mass_above(delta) * dt
    return poisson(key, counter, lam)


MEASURES = {UniformCubeMeasure.family: UniformCubeMeasure}


def make_measure(family: str, d: int, **params) -> LevyMeasure:
    try:
        cls = MEASURES[family]
    except KeyError:
        raise ValueError(
            f"unknown Levy measure family {family!r}; known: {sorted(MEASURES)}"
        ) from None
    return cls(d, **params)
