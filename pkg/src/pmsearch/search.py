"""Peak-localization algorithms over an acquisition oracle.

Every search returns a :class:`SearchOutcome` whose trace lists the
samples in the order they were taken. GSS and ternary search visit the
left interior point before the right one; the scanning algorithms sweep
from low to high angles.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from pmsearch.core import (
    IntensitySample,
    InvalidSpec,
    NoSignal,
    ScanBounds,
    SearchOutcome,
    Termination,
)
from pmsearch.oracle import Oracle

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0
TERNARY_RATIO = 2.0 / 3.0
DEFAULT_THRESHOLD = 0.2
DEFAULT_TOLERANCE = 0.5


class Algorithm(str, enum.Enum):
    WA_OFFLINE = "wa"
    WA_ONLINE = "wa-online"
    GSS = "gss"
    TERNARY = "ts"
    EXHAUSTIVE = "exhaustive"


class GssMode(str, enum.Enum):
    REUSE = "reuse"
    PAIRED_FRESH = "paired"


@dataclass(frozen=True)
class SearchSpec:
    """What to run and when to stop.

    ``budget`` caps acquisitions. For the offline weighted average it
    instead sets the number of equally spaced samples over ``bounds``
    (overriding ``step``). ``tolerance`` stops GSS/TS once the bracket
    is no wider than it.
    """

    algorithm: Algorithm = Algorithm.GSS
    bounds: ScanBounds = field(default_factory=ScanBounds)
    budget: int | None = None
    tolerance: float | None = None
    threshold: float = DEFAULT_THRESHOLD
    step: float | None = None
    gss_mode: GssMode = GssMode.REUSE

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(self, "gss_mode", GssMode(self.gss_mode))
        if self.budget is not None and self.budget < 0:
            raise InvalidSpec(f"budget must be >= 0, got {self.budget}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise InvalidSpec(f"tolerance must be > 0, got {self.tolerance}")
        if not 0.0 <= self.threshold < 1.0:
            raise InvalidSpec(f"threshold must lie in [0, 1), got {self.threshold}")
        if self.step is not None and not self.step > 0:
            raise InvalidSpec(f"step must be > 0, got {self.step}")
        algo = self.algorithm
        if algo in (Algorithm.GSS, Algorithm.TERNARY):
            if self.budget is None and self.tolerance is None:
                raise InvalidSpec(f"{algo.value} needs a budget or a tolerance")
        elif algo in (Algorithm.WA_ONLINE, Algorithm.EXHAUSTIVE):
            if self.step is None:
                raise InvalidSpec(f"{algo.value} needs a step")
        elif algo is Algorithm.WA_OFFLINE:
            if self.step is None and self.budget is None:
                raise InvalidSpec("wa needs a step or a budget")
            if self.budget is not None and self.budget < 2:
                raise InvalidSpec(f"wa needs a budget of at least 2 samples, got {self.budget}")

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "lo": self.bounds.lo,
            "hi": self.bounds.hi,
            "budget": self.budget,
            "tolerance": self.tolerance,
            "threshold": self.threshold,
            "step": self.step,
            "gss_mode": self.gss_mode.value,
        }


def weighted_average_offline(
    samples: Sequence[tuple[float, float]], threshold: float = DEFAULT_THRESHOLD
) -> float:
    """Intensity-weighted mean angle of the samples at or above ``threshold``."""
    if len(samples) == 0:
        raise ValueError("weighted average of no samples")
    kept = [(a, s) for a, s in samples if s >= threshold]
    if not kept:
        raise NoSignal(f"no sample reached the threshold {threshold}")
    weight = math.fsum(s for _, s in kept)
    if weight <= 0:
        raise NoSignal("all retained samples have zero intensity")
    return math.fsum(a * s for a, s in kept) / weight


def _wa_grid(spec: SearchSpec) -> list[float]:
    if spec.budget is not None:
        return [float(a) for a in np.linspace(spec.bounds.lo, spec.bounds.hi, spec.budget)]
    return spec.bounds.grid(spec.step)


def weighted_average_scan(oracle: Oracle, spec: SearchSpec) -> SearchOutcome:
    """Full scan over ``spec.bounds`` followed by the weighted average."""
    trace = tuple(oracle.sample(a) for a in _wa_grid(spec))
    estimate = weighted_average_offline(trace, spec.threshold)
    return SearchOutcome(estimate, trace, Termination.SCAN_COMPLETE)


def weighted_average_online(oracle: Oracle, spec: SearchSpec) -> SearchOutcome:
    """Low-to-high scan that stops once the peak has been seen and passed.

    The peak counts as passed at the first below-threshold reading that
    follows at least one reading at or above the threshold.
    """
    if spec.step is None:
        raise InvalidSpec("online weighted average needs a step")
    trace: list[IntensitySample] = []
    seen_peak = False
    termination = Termination.SCAN_COMPLETE
    for angle in spec.bounds.grid(spec.step):
        if spec.budget is not None and len(trace) >= spec.budget:
            termination = Termination.BUDGET_EXHAUSTED
            break
        sample = oracle.sample(angle)
        trace.append(sample)
        if sample.intensity >= spec.threshold:
            seen_peak = True
        elif seen_peak:
            termination = Termination.PEAK_PASSED
            break
    if not seen_peak:
        raise NoSignal(f"no sample reached the threshold {spec.threshold} after {len(trace)} acquisitions")
    return SearchOutcome(weighted_average_offline(trace, spec.threshold), tuple(trace), termination)


def exhaustive(oracle: Oracle, spec: SearchSpec) -> SearchOutcome:
    """Sample every grid angle; the estimate is the lowest angle of maximum intensity."""
    if spec.step is None:
        raise InvalidSpec("exhaustive scan needs a step")
    trace = tuple(oracle.sample(a) for a in spec.bounds.grid(spec.step))
    best = trace[0]
    for s in trace[1:]:
        if s.intensity > best.intensity:
            best = s
    return SearchOutcome(best.angle, trace, Termination.SCAN_COMPLETE)


def _bracket_search(oracle: Oracle, spec: SearchSpec, ratio: float, reuse: bool) -> SearchOutcome:
    if spec.budget is None and spec.tolerance is None:
        raise InvalidSpec(f"{spec.algorithm.value} needs a budget or a tolerance")
    left, right = spec.bounds.lo, spec.bounds.hi
    trace: list[IntensitySample] = []
    brackets: list[tuple[float, float, float, float]] = []
    # interior point carried over from the previous iteration: (angle, intensity, side)
    carried: tuple[float, float, int] | None = None

    while True:
        if spec.tolerance is not None and right - left <= spec.tolerance:
            termination = Termination.TOLERANCE_MET
            break
        m1 = ratio * left + (1.0 - ratio) * right
        m2 = (1.0 - ratio) * left + ratio * right
        f1 = f2 = None
        if carried is not None:
            angle, value, side = carried
            if side == 1:
                m1, f1 = angle, value
            else:
                m2, f2 = angle, value
        needed = (f1 is None) + (f2 is None)
        if spec.budget is not None and len(trace) + needed > spec.budget:
            termination = Termination.BUDGET_EXHAUSTED
            break
        if not left < m1 < m2 < right:
            # bracket has shrunk to floating-point resolution
            termination = Termination.TOLERANCE_MET
            break
        brackets.append((left, m1, m2, right))
        if f1 is None:
            s = oracle.sample(m1)
            trace.append(s)
            f1 = s.intensity
        if f2 is None:
            s = oracle.sample(m2)
            trace.append(s)
            f2 = s.intensity
        if f1 >= f2:
            right = m2
            carried = (m1, f1, 2) if reuse else None
        else:
            left = m1
            carried = (m2, f2, 1) if reuse else None

    return SearchOutcome((left + right) / 2.0, tuple(trace), termination, tuple(brackets))


def gss(oracle: Oracle, spec: SearchSpec) -> SearchOutcome:
    """Golden section search for the maximum.

    In reuse mode the surviving interior reading is kept, so every
    iteration after the first costs one acquisition. In paired mode both
    interior points are re-acquired, two per iteration.
    """
    return _bracket_search(oracle, spec, GOLDEN_RATIO, reuse=spec.gss_mode is GssMode.REUSE)


def ternary(oracle: Oracle, spec: SearchSpec) -> SearchOutcome:
    """Ternary search: interior points at the trisection, two acquisitions per iteration."""
    return _bracket_search(oracle, spec, TERNARY_RATIO, reuse=False)


_DISPATCH = {
    Algorithm.WA_OFFLINE: weighted_average_scan,
    Algorithm.WA_ONLINE: weighted_average_online,
    Algorithm.GSS: gss,
    Algorithm.TERNARY: ternary,
    Algorithm.EXHAUSTIVE: exhaustive,
}


def run_search(oracle: Oracle, spec: SearchSpec) -> SearchOutcome:
    return _DISPATCH[spec.algorithm](oracle, spec)
