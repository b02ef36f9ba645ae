"""Acquisition oracles: where a search gets its intensity readings from."""

from __future__ import annotations

import abc
import bisect
import csv
import enum
import io
import math
import os
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from pmsearch.core import (
    AllZero,
    BudgetExhausted,
    IntensityCurve,
    IntensitySample,
    OutOfRange,
)

RNG_ALGORITHM = "numpy.PCG64"
SCAN_HEADER = ("angle_deg", "intensity")

# x where (sin x / x)**2 == 1/2
_SINC2_HALF_MAX = 1.3915573782515103
# requests this close outside a replay span snap to its edge
_SPAN_SLACK = 1e-9


class Oracle(abc.ABC):
    """Anything that can report an intensity at a commanded angle."""

    @abc.abstractmethod
    def acquire(self, angle: float) -> float:
        ...

    def sample(self, angle: float) -> IntensitySample:
        """Acquire at ``angle`` and return the (angle, intensity) pair actually recorded.

        Hardware-backed oracles override this to report the angle the
        actuator really reached.
        """
        return IntensitySample(angle, self.acquire(angle))


class Profile(str, enum.Enum):
    GAUSSIAN = "gaussian"
    SINC_SQUARED = "sinc2"
    RAISED_COSINE = "raised-cosine"


def profile_value(profile: Profile, offset: float, fwhm: float) -> float:
    """Unit-peak directivity lobe evaluated ``offset`` degrees from its center.

    All three shapes equal 1 at zero offset and 1/2 at ``fwhm / 2``.
    The sinc² lobe is truncated to its main lobe and the raised cosine
    is zero beyond one FWHM, so every profile is unimodal.
    """
    half = fwhm / 2.0
    if profile is Profile.GAUSSIAN:
        return 2.0 ** (-((offset / half) ** 2))
    if profile is Profile.SINC_SQUARED:
        x = _SINC2_HALF_MAX * abs(offset) / half
        if x == 0.0:
            return 1.0
        if x >= math.pi:
            return 0.0
        return (math.sin(x) / x) ** 2
    if profile is Profile.RAISED_COSINE:
        if abs(offset) >= fwhm:
            return 0.0
        return 0.5 * (1.0 + math.cos(math.pi * offset / fwhm))
    raise ValueError(f"unknown profile {profile!r}")


@dataclass
class DirectivityModel(Oracle):
    """Simulated transducer: a symmetric lobe around ``peak`` plus noise.

    Readings are ``clamp(amplitude * lobe + floor + N(0, noise_sigma), 0, 1)``.
    The noise stream comes from a PCG64 generator seeded with ``seed``, so
    a given seed always replays the same readings.
    """

    peak: float = 0.0
    profile: Profile = Profile.GAUSSIAN
    amplitude: float = 1.0
    fwhm: float = 8.66
    noise_sigma: float = 0.0
    floor: float = 0.0
    seed: Any = None
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.profile = Profile(self.profile)
        if not math.isfinite(self.peak):
            raise ValueError("peak must be finite")
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError(f"amplitude must lie in [0, 1], got {self.amplitude}")
        if not self.fwhm > 0:
            raise ValueError(f"fwhm must be > 0, got {self.fwhm}")
        if not self.noise_sigma >= 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not self.floor >= 0:
            raise ValueError(f"floor must be >= 0, got {self.floor}")
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def noiseless(self, angle: float) -> float:
        value = self.amplitude * profile_value(self.profile, angle - self.peak, self.fwhm) + self.floor
        return min(max(value, 0.0), 1.0)

    def acquire(self, angle: float) -> float:
        if not math.isfinite(angle):
            raise ValueError(f"angle must be finite, got {angle!r}")
        value = self.amplitude * profile_value(self.profile, angle - self.peak, self.fwhm) + self.floor
        if self.noise_sigma > 0:
            value += self.noise_sigma * self._rng.standard_normal()
        return min(max(value, 0.0), 1.0)

    def with_peak(self, peak: float, seed: Any = None) -> DirectivityModel:
        """Fresh copy centered on ``peak`` with its own noise stream."""
        return replace(self, peak=peak, seed=seed)

    def params(self) -> dict:
        return {
            "profile": self.profile.value,
            "peak": self.peak,
            "amplitude": self.amplitude,
            "fwhm": self.fwhm,
            "noise_sigma": self.noise_sigma,
            "floor": self.floor,
        }


class ReplayOracle(Oracle):
    """Replays a recorded scan, linearly interpolating between samples."""

    def __init__(self, curve: IntensityCurve, interpolation: str = "linear"):
        if interpolation != "linear":
            raise ValueError(f"unsupported interpolation {interpolation!r}")
        if len(curve) < 2:
            raise ValueError("replay needs a curve with at least 2 samples")
        self.curve = curve
        self.interpolation = interpolation
        self._angles = list(curve.angles)
        self._values = list(curve.intensities)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ReplayOracle:
        return cls(normalize_curve(load_scan(path)))

    def acquire(self, angle: float) -> float:
        angles, values = self._angles, self._values
        lo, hi = angles[0], angles[-1]
        if not (lo - _SPAN_SLACK <= angle <= hi + _SPAN_SLACK):
            raise OutOfRange(f"angle {angle} deg outside recorded span [{lo}, {hi}]")
        angle = min(max(angle, lo), hi)
        j = bisect.bisect_right(angles, angle) - 1
        if angles[j] == angle:
            return values[j]
        a0, a1 = angles[j], angles[j + 1]
        t = (angle - a0) / (a1 - a0)
        return values[j] + t * (values[j + 1] - values[j])

    def resample(self, step: float) -> ReplayOracle:
        """Replay of this curve interpolated onto a regular ``step`` grid over its span."""
        lo, hi = self.curve.span
        n = int(math.floor((hi - lo) / step + 1e-9))
        angles = [min(lo + k * step, hi) for k in range(n + 1)]
        return ReplayOracle(IntensityCurve(tuple(angles), tuple(self.acquire(a) for a in angles)))


class CountingOracle(Oracle):
    """Wraps another oracle, counting acquisitions and enforcing an optional budget."""

    def __init__(self, inner: Oracle, budget: int | None = None):
        if budget is not None and budget < 0:
            raise ValueError(f"budget must be >= 0, got {budget}")
        self.inner = inner
        self.budget = budget
        self.count = 0
        self._lock = threading.Lock()

    def _charge(self):
        with self._lock:
            if self.budget is not None and self.count >= self.budget:
                raise BudgetExhausted(f"acquisition budget of {self.budget} spent")
            self.count += 1

    def acquire(self, angle: float) -> float:
        self._charge()
        return self.inner.acquire(angle)

    def sample(self, angle: float) -> IntensitySample:
        self._charge()
        return self.inner.sample(angle)


def normalize_curve(curve: IntensityCurve) -> IntensityCurve:
    """Scale a raw scan so its maximum is 1. Negative readings are clipped to 0."""
    peak = max(curve.intensities)
    if peak <= 0:
        raise AllZero("curve has no positive intensity; no signal present in the scan")
    return IntensityCurve(curve.angles, tuple(max(s, 0.0) / peak for s in curve.intensities))


def load_scan(path: str | os.PathLike) -> IntensityCurve:
    """Read a raw ``angle_deg,intensity`` CSV scan. Samples are sorted by angle."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        return parse_scan(fh.read(), source=str(path))


def parse_scan(text: str, source: str = "<scan>") -> IntensityCurve:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SCAN_HEADER:
        raise ValueError(f"{source}: expected header 'angle_deg,intensity', got {header!r}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ValueError(f"{source}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            rows.append((float(row[0]), float(row[1])))
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    rows.sort()
    try:
        return IntensityCurve.from_samples(rows)
    except ValueError as exc:
        raise ValueError(f"{source}: {exc}") from None


def format_scan(curve: IntensityCurve) -> str:
    lines = [",".join(SCAN_HEADER)]
    lines += [f"{a!r},{s!r}" for a, s in zip(curve.angles, curve.intensities)]
    return "\n".join(lines) + "\n"


def save_scan(curve: IntensityCurve, path: str | os.PathLike) -> None:
    Path(path).write_text(format_scan(curve), encoding="utf-8", newline="\n")
