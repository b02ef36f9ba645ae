import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from pmsearch.core import AllZero, BudgetExhausted, IntensityCurve, OutOfRange
from pmsearch.oracle import (
    CountingOracle,
    DirectivityModel,
    Profile,
    ReplayOracle,
    format_scan,
    load_scan,
    normalize_curve,
    parse_scan,
    profile_value,
    save_scan,
)


def test_gaussian_peak_and_half_max():
    m = DirectivityModel(peak=0.0, fwhm=10.0)
    assert m.acquire(0.0) == 1.0
    assert m.acquire(5.0) == m.acquire(-5.0) == 0.5


def test_gaussian_off_center():
    m = DirectivityModel(peak=7.3, fwhm=10.0)
    expected = math.exp(-math.log(2) * (2.5 / 5.0) ** 2)  # same lobe written with exp/ln
    assert m.acquire(7.3 + 2.5) == pytest.approx(expected, abs=1e-12)
    assert m.acquire(7.3 - 2.5) == pytest.approx(0.8409, abs=1e-4)


@pytest.mark.parametrize("profile", list(Profile))
def test_every_profile_has_unit_peak_and_stated_fwhm(profile):
    assert profile_value(profile, 0.0, 12.0) == 1.0
    half = brentq(lambda d: profile_value(profile, d, 12.0) - 0.5, 1e-6, 11.9, xtol=1e-13)
    assert half == pytest.approx(6.0, abs=1e-9)


@pytest.mark.parametrize("profile", list(Profile))
def test_noiseless_profile_even(profile):
    rng = np.random.default_rng(11)
    for peak, d, fwhm in zip(rng.uniform(-30, 30, 1000), rng.uniform(0, 40, 1000), rng.uniform(2, 40, 1000)):
        m = DirectivityModel(peak=float(peak), fwhm=float(fwhm), profile=profile)
        assert abs(m.acquire(peak + d) - m.acquire(peak - d)) < 1e-12


@pytest.mark.parametrize("profile", list(Profile))
def test_noiseless_profile_strictly_decreasing_on_support(profile):
    fwhm = 8.66
    offsets = np.linspace(0, 3 * fwhm, 3001)
    values = [profile_value(profile, float(d), fwhm) for d in offsets]
    support = [v for v in values if v > 0]
    assert len(support) > 100
    assert all(b < a for a, b in zip(support, support[1:]))


def test_output_clamped():
    m = DirectivityModel(fwhm=5.0, noise_sigma=2.0, floor=0.5, seed=3)
    readings = [m.acquire(a) for a in np.linspace(-35, 35, 500)]
    assert min(readings) == 0.0 and max(readings) == 1.0


def test_seed_reproduces_noise():
    a = DirectivityModel(peak=2.0, noise_sigma=0.1, seed=42)
    b = DirectivityModel(peak=2.0, noise_sigma=0.1, seed=42)
    grid = np.linspace(-10, 10, 50)
    assert [a.acquire(x) for x in grid] == [b.acquire(x) for x in grid]
    c = DirectivityModel(peak=2.0, noise_sigma=0.1, seed=43)
    assert [a.acquire(x) for x in grid] != [c.acquire(x) for x in grid]


def test_model_validation():
    with pytest.raises(ValueError):
        DirectivityModel(fwhm=0.0)
    with pytest.raises(ValueError):
        DirectivityModel(noise_sigma=-1.0)
    with pytest.raises(ValueError):
        DirectivityModel(amplitude=1.5)


@pytest.mark.parametrize(
    "samples, angle, expected",
    [
        ([(0.0, 0.0), (10.0, 1.0)], 5.0, 0.5),
        ([(0.0, 0.0), (10.0, 1.0)], 10.0, 1.0),
        ([(-2.0, 0.2), (0.0, 1.0), (2.0, 0.2)], 1.0, 0.6),
    ],
)
def test_replay_examples(samples, angle, expected):
    oracle = ReplayOracle(IntensityCurve.from_samples(samples))
    assert oracle.acquire(angle) == pytest.approx(expected, abs=1e-15)


def test_replay_out_of_range():
    oracle = ReplayOracle(IntensityCurve.from_samples([(0.0, 0.0), (10.0, 1.0)]))
    with pytest.raises(OutOfRange):
        oracle.acquire(10.5)
    with pytest.raises(OutOfRange):
        oracle.acquire(-0.1)


@given(st.lists(st.tuples(st.integers(-700, 700), st.floats(0, 1)), min_size=2, max_size=40, unique_by=lambda t: t[0]))
def test_replay_exact_at_samples(pairs):
    curve = IntensityCurve.from_samples(sorted((a / 20.0, s) for a, s in pairs))
    oracle = ReplayOracle(curve)
    for a, s in zip(curve.angles, curve.intensities):
        assert oracle.acquire(a) == s


def test_counting_budget():
    m = DirectivityModel()
    c = CountingOracle(m, budget=2)
    c.acquire(0.0)
    c.acquire(1.0)
    assert c.count == 2
    with pytest.raises(BudgetExhausted):
        c.acquire(2.0)
    unbounded = CountingOracle(m)
    for _ in range(1000):
        unbounded.acquire(0.0)
    assert unbounded.count == 1000


def test_counting_under_concurrency():
    c = CountingOracle(DirectivityModel())
    calls = 0
    lock = threading.Lock()

    def worker(n):
        nonlocal calls
        for i in range(n):
            if i % 2:
                c.acquire(0.0)
            else:
                c.sample(1.0)
            with lock:
                calls += 1

    threads = [threading.Thread(target=worker, args=(500 + 37 * k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert c.count == calls


def test_normalize_curve():
    raw = IntensityCurve.from_samples([(0.0, 0.5), (1.0, 2.0)])
    norm = normalize_curve(raw)
    assert norm.intensities == (0.25, 1.0) and norm.angles == raw.angles
    assert normalize_curve(norm) == norm
    with pytest.raises(AllZero):
        normalize_curve(IntensityCurve.from_samples([(0.0, 0.0), (1.0, 0.0)]))


def test_scan_file_round_trip(tmp_path):
    curve = IntensityCurve.from_samples([(-1.5, 3.0), (0.0, 12.25), (1.5, 2.0)])
    path = tmp_path / "scan.csv"
    save_scan(curve, path)
    text = path.read_bytes()
    assert text.startswith(b"angle_deg,intensity\n") and b"\r" not in text
    assert load_scan(path) == curve
    assert ReplayOracle.from_file(path).acquire(0.0) == 1.0


def test_scan_parse_sorts_and_rejects_bad_input():
    curve = parse_scan("angle_deg,intensity\n2,0.5\n-1,0.25\n\n")
    assert curve.angles == (-1.0, 2.0)
    assert format_scan(curve).splitlines()[1] == "-1.0,0.25"
    with pytest.raises(ValueError, match="header"):
        parse_scan("angle,value\n1,2\n")
    with pytest.raises(ValueError, match=":3"):
        parse_scan("angle_deg,intensity\n1,2\n2,abc\n")
