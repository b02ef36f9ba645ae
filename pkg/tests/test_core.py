import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmsearch.core import (
    EmptyTrace,
    IntensityCurve,
    IntensitySample,
    ScanBounds,
    SearchOutcome,
    Termination,
    localization_error,
    travel,
)

angles = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@pytest.mark.parametrize(
    "estimate, reference, expected",
    [(10.0, 10.0, 0.0), (9.71, 10.0, 0.29), (-3.2, 1.1, 4.3)],
)
def test_localization_error_examples(estimate, reference, expected):
    assert localization_error(estimate, reference) == pytest.approx(expected, abs=1e-12)


def test_localization_error_rejects_nan():
    with pytest.raises(ValueError):
        localization_error(math.nan, 0.0)


@given(angles, angles)
def test_localization_error_symmetric(a, b):
    assert localization_error(a, b) == localization_error(b, a) >= 0


@pytest.mark.parametrize(
    "trace, expected",
    [([0.0], 0.0), ([-35.0, 35.0, 0.0], 105.0), ([0.0, 5.0, 10.0, 15.0], 15.0)],
)
def test_travel_examples(trace, expected):
    assert travel(trace) == expected


def test_travel_empty():
    with pytest.raises(EmptyTrace):
        travel([])


@given(st.lists(angles, min_size=1, max_size=30))
def test_travel_reversal_invariant(trace):
    assert travel(trace) == pytest.approx(travel(trace[::-1]), rel=1e-12, abs=1e-9)


@given(st.lists(angles, min_size=1, max_size=30))
def test_travel_monotone_is_span(trace):
    trace = sorted(trace)
    assert travel(trace) == pytest.approx(trace[-1] - trace[0], rel=1e-12, abs=1e-9)


def test_scan_bounds_defaults_and_grid():
    b = ScanBounds()
    assert (b.lo, b.hi) == (-35.0, 35.0)
    grid = b.grid(5.0)
    assert len(grid) == 15 and grid[0] == -35.0 and grid[-1] == 35.0
    with pytest.raises(ValueError):
        ScanBounds(1.0, 1.0)
    with pytest.raises(ValueError):
        ScanBounds(0.0, math.inf)


def test_curve_invariants():
    IntensityCurve((0.0, 1.0), (0.2, 0.3))
    with pytest.raises(ValueError):
        IntensityCurve((0.0, 0.0), (0.2, 0.3))
    with pytest.raises(ValueError):
        IntensityCurve((1.0, 0.0), (0.2, 0.3))
    with pytest.raises(ValueError):
        IntensityCurve((0.0,), (0.2, 0.3))


def test_outcome_accounting():
    trace = (IntensitySample(-8.0, 0.1), IntensitySample(8.0, 0.4), IntensitySample(0.0, 0.9))
    out = SearchOutcome(1.0, trace, Termination.BUDGET_EXHAUSTED)
    assert out.acquisitions == 3
    assert out.travel_deg == 24.0
    assert SearchOutcome(0.0, (), Termination.TOLERANCE_MET).travel_deg == 0.0
