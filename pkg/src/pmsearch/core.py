"""Shared domain types, errors and metrics.

Angles are plain floats in degrees everywhere; intensities are floats
normalized to [0, 1] once they leave an oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

DEFAULT_LO = -35.0
DEFAULT_HI = 35.0


class PeakSearchError(Exception):
    """Base class for domain errors raised by this package."""


class NoSignal(PeakSearchError):
    """No sample reached the detection threshold."""


class AllZero(PeakSearchError, ValueError):
    """A curve carries no signal at all, so it cannot be normalized."""


class OutOfRange(PeakSearchError, ValueError):
    """An angle was requested outside the recorded span."""


class BudgetExhausted(PeakSearchError):
    """An acquisition was attempted after the budget was spent."""


class EmptyTrace(PeakSearchError, ValueError):
    pass


class InvalidSpec(PeakSearchError, ValueError):
    pass


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ScanBounds:
    lo: float = DEFAULT_LO
    hi: float = DEFAULT_HI

    def __post_init__(self):
        lo = _check_finite("lo", self.lo)
        hi = _check_finite("hi", self.hi)
        if not lo < hi:
            raise ValueError(f"scan bounds need lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, angle: float) -> bool:
        return self.lo <= angle <= self.hi

    def grid(self, step: float) -> list[float]:
        """Angles lo, lo + step, ... up to and including hi (when it lands on the grid)."""
        if not step > 0:
            raise ValueError(f"step must be > 0, got {step}")
        n = int(math.floor(self.width / step + 1e-9))
        return [min(self.lo + k * step, self.hi) for k in range(n + 1)]


class IntensitySample(NamedTuple):
    angle: float
    intensity: float


@dataclass(frozen=True)
class IntensityCurve:
    """An ordered scan record: strictly increasing angles with one intensity each.

    Intensities are not required to be normalized here; raw scans are
    loaded as-is and normalized by :func:`pmsearch.oracle.normalize_curve`.
    """

    angles: tuple[float, ...]
    intensities: tuple[float, ...]

    def __post_init__(self):
        angles = tuple(_check_finite("angle", a) for a in self.angles)
        intensities = tuple(_check_finite("intensity", s) for s in self.intensities)
        if len(angles) != len(intensities):
            raise ValueError("angles and intensities differ in length")
        if not angles:
            raise ValueError("curve has no samples")
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise ValueError("curve angles must be strictly increasing")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "intensities", intensities)

    @classmethod
    def from_samples(cls, samples: Iterable[tuple[float, float]]) -> IntensityCurve:
        samples = list(samples)
        return cls(tuple(a for a, _ in samples), tuple(s for _, s in samples))

    @property
    def samples(self) -> list[IntensitySample]:
        return [IntensitySample(a, s) for a, s in zip(self.angles, self.intensities)]

    @property
    def span(self) -> tuple[float, float]:
        return self.angles[0], self.angles[-1]

    def __len__(self) -> int:
        return len(self.angles)


class Termination(enum.Enum):
    TOLERANCE_MET = "ToleranceMet"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    PEAK_PASSED = "PeakPassed"
    SCAN_COMPLETE = "ScanComplete"


@dataclass(frozen=True)
class SearchOutcome:
    """Result of one search run.

    ``trace`` is in visit order. ``brackets`` holds the (left, inner1,
    inner2, right) quadruple of every GSS/TS iteration and is empty for
    the scanning algorithms.
    """

    estimate: float
    trace: tuple[IntensitySample, ...]
    termination: Termination
    brackets: tuple[tuple[float, float, float, float], ...] = field(default=(), repr=False)

    @property
    def acquisitions(self) -> int:
        return len(self.trace)

    @property
    def travel_deg(self) -> float:
        if not self.trace:
            return 0.0
        return travel([s.angle for s in self.trace])


def localization_error(estimate: float, reference: float) -> float:
    return abs(_check_finite("estimate", estimate) - _check_finite("reference", reference))


def travel(angles: Sequence[float]) -> float:
    """Total rotation needed to visit ``angles`` in order.

    Summed left to right so the rig's running odometer reproduces it bit
    for bit.
    """
    if len(angles) == 0:
        raise EmptyTrace("travel of an empty trace is undefined")
    total = 0.0
    for a, b in zip(angles, angles[1:]):
        total += abs(b - a)
    return total
