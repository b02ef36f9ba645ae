"""Peak localization for expensive, noisy, unimodal 1-D signals.

Searches a rotating transducer's angle for the position of maximum
photoacoustic intensity using weighted averaging, golden section search
or ternary search.
"""

from pmsearch.core import (
    AllZero,
    BudgetExhausted,
    EmptyTrace,
    IntensityCurve,
    IntensitySample,
    InvalidSpec,
    NoSignal,
    OutOfRange,
    PeakSearchError,
    ScanBounds,
    SearchOutcome,
    Termination,
    localization_error,
    travel,
)
from pmsearch.oracle import CountingOracle, DirectivityModel, Oracle, ReplayOracle
from pmsearch.search import (
    Algorithm,
    GssMode,
    SearchSpec,
    exhaustive,
    gss,
    run_search,
    ternary,
    weighted_average_offline,
    weighted_average_online,
    weighted_average_scan,
)

__all__ = [
    "AllZero",
    "Algorithm",
    "BudgetExhausted",
    "CountingOracle",
    "DirectivityModel",
    "EmptyTrace",
    "GssMode",
    "IntensityCurve",
    "IntensitySample",
    "InvalidSpec",
    "NoSignal",
    "Oracle",
    "OutOfRange",
    "PeakSearchError",
    "ReplayOracle",
    "ScanBounds",
    "SearchOutcome",
    "SearchSpec",
    "Termination",
    "exhaustive",
    "gss",
    "localization_error",
    "run_search",
    "ternary",
    "travel",
    "weighted_average_offline",
    "weighted_average_online",
    "weighted_average_scan",
]
