"""Command-line entry point: ``pmsearch <subcommand> ...``.

Exit status is 0 on success, 1 on a domain error (no signal, empty
scan, rig failure) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from pmsearch.core import InvalidSpec, PeakSearchError, ScanBounds
from pmsearch.harness import (
    TrialSpec,
    atomic_write_text,
    calibrate_wa_noise,
    half_range_from_curve,
    load_calibration,
    replay_eval,
    sensitive_range,
    sweep_budgets,
    write_sweep,
)
from pmsearch.oracle import DirectivityModel, Profile, load_scan, normalize_curve
from pmsearch.search import DEFAULT_TOLERANCE, Algorithm, GssMode, SearchSpec, run_search

OUTPUT_DIR_ENV = "PMSEARCH_OUTPUT_DIR"

log = logging.getLogger("pmsearch")


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    """Resolved command line, in a JSON-friendly form for ``.meta`` sidecars."""

    subcommand: str
    seed: int = 0
    lo: float = -35.0
    hi: float = 35.0
    output: str | None = None
    verbosity: int = 0
    options: dict = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> CliConfig:
        values = {k: v for k, v in vars(ns).items() if k != "handler"}
        common = {k: values.pop(k) for k in ("subcommand", "seed", "lo", "hi", "output", "verbosity")}
        options = {k: list(v) if isinstance(v, tuple) else v for k, v in values.items()}
        return cls(**common, options=options)


# --- argument types -------------------------------------------------------------


def _number(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def finite(text: str) -> float:
    return _number(text)


def positive(text: str) -> float:
    value = _number(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0: {text!r}")
    return value


def non_negative(text: str) -> float:
    value = _number(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return value


def unit_interval(text: str) -> float:
    value = _number(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {text!r}")
    return value


def threshold(text: str) -> float:
    value = _number(text)
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1): {text!r}")
    return value


def count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return value


def positive_count(text: str) -> int:
    value = count(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def budget_list(text: str) -> tuple[int, ...]:
    """``lo:hi:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError
            values = tuple(range(parts[0], parts[1] + 1, parts[2]))
        else:
            values = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step or a comma list of integers, got {text!r}") from None
    if not values or any(v < 2 for v in values):
        raise argparse.ArgumentTypeError(f"budgets must all be >= 2, got {text!r}")
    return values


def angle_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(_number(p) for p in text.split(","))
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated degrees: {exc}") from None
    if any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"half ranges must be >= 0, got {text!r}")
    return values


def endpoint(text: str) -> str:
    host, sep, port = text.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return text


# --- parser ---------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=count, default=0, help="base RNG seed (default 0)")
    p.add_argument("--lo", type=finite, default=-35.0, help="lower scan bound, deg")
    p.add_argument("--hi", type=finite, default=35.0, help="upper scan bound, deg")
    p.add_argument("-o", "--output", default=None, help="output file")
    p.add_argument("-v", "--verbose", dest="verbosity", action="count", default=0)


def _add_model(p: argparse.ArgumentParser, peak: bool = True):
    p.add_argument("--profile", choices=[pr.value for pr in Profile], default="gaussian")
    if peak:
        p.add_argument("--peak", type=finite, default=0.0, help="true peak angle, deg")
    p.add_argument("--fwhm", type=positive, default=8.66, help="lobe full width at half maximum, deg")
    p.add_argument("--noise", type=non_negative, default=0.0, help="additive Gaussian noise sigma")
    p.add_argument("--floor", type=unit_interval, default=0.0, help="background intensity")
    p.add_argument("--amplitude", type=unit_interval, default=1.0)


def _add_search(p: argparse.ArgumentParser, budget_flag: bool = True):
    p.add_argument("--algo", choices=[a.value for a in Algorithm], default="gss")
    if budget_flag:
        p.add_argument("--budget", type=count, default=None, help="maximum acquisitions")
    p.add_argument("--tolerance", type=positive, default=None, help="GSS/TS bracket width to stop at, deg")
    p.add_argument("--threshold", type=threshold, default=0.2, help="WA intensity threshold")
    p.add_argument("--step", type=positive, default=None, help="scan step for WA/exhaustive, deg")
    p.add_argument("--mode", choices=[m.value for m in GssMode], default="paired", help="GSS evaluation mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmsearch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("search", help="run one search against the simulator or a rig")
    _add_common(p)
    _add_model(p)
    _add_search(p)
    p.add_argument("--rig", type=endpoint, default=None, help="HOST:PORT of a running rig server")
    p.set_defaults(handler=cmd_search)

    p = sub.add_parser("sweep", help="Monte Carlo error-vs-budget sweep")
    _add_common(p)
    _add_model(p, peak=False)
    _add_search(p, budget_flag=False)
    p.add_argument("--budgets", type=budget_list, default=None, help="lo:hi:step or comma list")
    p.add_argument("--trials", type=positive_count, default=1000)
    p.add_argument("--margin", type=non_negative, default=5.0, help="keep drawn peaks this far inside the bounds")
    p.add_argument("--calibrated", action="store_true", help="use the frozen calibration's fwhm and noise")
    p.add_argument("--jobs", type=positive_count, default=1, help="parallel worker processes")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("replay", help="evaluate a search on recorded scan files")
    _add_common(p)
    _add_search(p)
    p.add_argument("scans", nargs="+", help="CSV scans with header angle_deg,intensity")
    p.add_argument("--resolution", type=positive, default=0.1, help="interpolation grid step, deg")
    p.set_defaults(handler=cmd_replay)

    p = sub.add_parser("sensitive-range", help="aggregate half sensitive ranges")
    _add_common(p)
    p.add_argument("--halves", type=angle_list, default=None, help="comma-separated half ranges, deg")
    p.add_argument("--curves", nargs="+", default=None, help="tip-intensity scans to measure half ranges from")
    p.add_argument("--detection-floor", type=unit_interval, default=0.5, help="lowest detectable normalized intensity")
    p.set_defaults(handler=cmd_sensitive_range)

    p = sub.add_parser("serve", help="run the simulated rotation stage + DAQ")
    _add_common(p)
    _add_model(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=count, default=5025)
    p.add_argument("--stdio", action="store_true", help="serve one session on stdin/stdout instead of TCP")
    p.add_argument("--speed", type=positive, default=30.0, help="rotation speed, deg/s")
    p.add_argument("--delay", type=non_negative, default=10.0, help="acquisition delay, s")
    p.add_argument("--quantization", type=non_negative, default=0.0, help="actuator step, deg (0 = continuous)")
    p.add_argument("--clock", choices=["simulated", "real"], default="simulated")
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("calibrate", help="fit the simulation noise to the reference WA error level")
    _add_common(p)
    p.add_argument("--trials", type=positive_count, default=1000)
    p.add_argument("--screen-trials", type=positive_count, default=200)
    p.add_argument("--margin", type=non_negative, default=5.0)
    p.add_argument("--jobs", type=positive_count, default=1)
    p.set_defaults(handler=cmd_calibrate)
    return parser


# --- helpers --------------------------------------------------------------------


def _bounds(ns) -> ScanBounds:
    try:
        return ScanBounds(ns.lo, ns.hi)
    except ValueError:
        raise UsageError(f"--lo/--hi: need lo < hi, got {ns.lo} and {ns.hi}") from None


def _model(ns, peak: float = 0.0) -> DirectivityModel:
    return DirectivityModel(
        peak=peak, profile=ns.profile, amplitude=ns.amplitude, fwhm=ns.fwhm,
        noise_sigma=ns.noise, floor=ns.floor, seed=ns.seed,
    )


def _search_spec(ns, budget: int | None) -> SearchSpec:
    algo = Algorithm(ns.algo)
    step, tolerance = ns.step, ns.tolerance
    if step is None:
        if algo is Algorithm.EXHAUSTIVE:
            step = 1.0
        elif algo is Algorithm.WA_ONLINE or (algo is Algorithm.WA_OFFLINE and budget is None):
            step = 5.0
    if algo in (Algorithm.GSS, Algorithm.TERNARY) and budget is None and tolerance is None:
        tolerance = DEFAULT_TOLERANCE
    if algo is Algorithm.WA_OFFLINE and budget is not None and budget < 2:
        raise UsageError(f"--budget: wa needs at least 2 samples, got {budget}")
    return SearchSpec(
        algorithm=algo, bounds=_bounds(ns), budget=budget, tolerance=tolerance,
        threshold=ns.threshold, step=step, gss_mode=GssMode(ns.mode),
    )


def _default_output(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / name


def _check_bounds_contain(ns, value: float, flag: str):
    _bounds(ns)
    if not ns.lo <= value <= ns.hi:
        raise UsageError(f"{flag}: {value} lies outside the scan bounds [{ns.lo}, {ns.hi}]")


def _load_scans(paths: Sequence[str]):
    curves = []
    for path in paths:
        try:
            curves.append(load_scan(path))
        except OSError as exc:
            raise UsageError(f"{path}: cannot read scan file ({exc.strerror})") from None
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return curves


# --- subcommands ----------------------------------------------------------------


def cmd_search(ns, config: CliConfig, argv: Sequence[str]) -> int:
    _check_bounds_contain(ns, ns.peak, "--peak")
    spec = _search_spec(ns, ns.budget)
    if ns.rig:
        from pmsearch.rig import RigClient, RigOracle

        host, _, port = ns.rig.rpartition(":")
        with RigClient(host, int(port)) as client:
            outcome = run_search(RigOracle(client), spec)
    else:
        outcome = run_search(_model(ns, ns.peak), spec)
    print(
        f"estimate: {outcome.estimate:.4f} deg, acquisitions: {outcome.acquisitions}, "
        f"travel: {outcome.travel_deg:.2f} deg, termination: {outcome.termination.value}"
    )
    if not ns.rig:
        print(f"error: {abs(outcome.estimate - ns.peak):.4f} deg")
    if ns.output:
        lines = ["step,angle_deg,intensity"]
        lines += [f"{i},{s.angle!r},{s.intensity!r}" for i, s in enumerate(outcome.trace)]
        atomic_write_text(ns.output, "\n".join(lines) + "\n")
    return 0


def cmd_sweep(ns, config: CliConfig, argv: Sequence[str]) -> int:
    algo = Algorithm(ns.algo)
    budgets = ns.budgets
    if budgets is None:
        budgets = tuple(range(8, 29, 2)) if algo is Algorithm.WA_OFFLINE else tuple(range(2, 29, 2))
    model = _model(ns)
    if ns.calibrated:
        cal = load_calibration()
        model = DirectivityModel(
            profile=cal.profile, amplitude=ns.amplitude, fwhm=cal.fwhm, noise_sigma=cal.noise_sigma, floor=ns.floor,
        )
    bounds = _bounds(ns)
    if 2 * ns.margin >= bounds.width:
        raise UsageError(f"--margin: {ns.margin} leaves no room for peaks inside [{ns.lo}, {ns.hi}]")
    spec = _search_spec(ns, budgets[0])
    trial_spec = TrialSpec(model, spec, n_trials=ns.trials, margin=ns.margin, base_seed=ns.seed)
    table = sweep_budgets(trial_spec, budgets, jobs=ns.jobs)
    out = Path(ns.output) if ns.output else _default_output(f"sweep_{algo.value}.csv")
    write_sweep(table, out, extra_meta={"cli": {"argv": list(argv), "config": asdict(config)}})
    sys.stdout.write(table.to_csv())
    print(f"wrote {out} (+ .meta, plot script)")
    return 0


def cmd_replay(ns, config: CliConfig, argv: Sequence[str]) -> int:
    curves = _load_scans(ns.scans)
    spec = _search_spec(ns, ns.budget)
    report = replay_eval(curves, spec, ns.resolution)
    lines = ["file,reference_deg,estimate_deg,error_deg"]
    for path, ref, est, err in zip(ns.scans, report.references, report.estimates, report.errors):
        if err is None:
            print(f"{path}: skipped (no signal)")
            lines.append(f"{path},,,")
        else:
            print(f"{path}: reference {ref:.3f} deg, estimate {est:.3f} deg, error {err:.3f} deg")
            lines.append(f"{path},{ref:.6f},{est:.6f},{err:.6f}")
    if not report.valid_errors:
        raise PeakSearchError("no scan carried a usable signal")
    mean, std = report.summary()
    print(f"mean error: {mean:.2f} ± {std:.2f} deg over {len(report.valid_errors)} scans")
    if ns.output:
        atomic_write_text(ns.output, "\n".join(lines) + "\n")
    return 0


def cmd_sensitive_range(ns, config: CliConfig, argv: Sequence[str]) -> int:
    if (ns.halves is None) == (ns.curves is None):
        raise UsageError("give exactly one of --halves or --curves")
    if ns.halves is not None:
        halves = list(ns.halves)
    else:
        halves = []
        for path, curve in zip(ns.curves, _load_scans(ns.curves)):
            try:
                half = half_range_from_curve(normalize_curve(curve), ns.detection_floor)
            except PeakSearchError as exc:
                raise type(exc)(f"{path}: {exc}") from None
            print(f"{path}: half range {half:g} deg")
            halves.append(half)
    report = sensitive_range(halves)
    print(report.describe())
    if ns.output:
        atomic_write_text(ns.output, json.dumps(asdict(report), sort_keys=True, indent=2) + "\n")
    return 0


def cmd_serve(ns, config: CliConfig, argv: Sequence[str]) -> int:
    from pmsearch.rig import RigServer, RigState, serve_stream

    _check_bounds_contain(ns, ns.peak, "--peak")
    state = RigState(
        model=_model(ns, ns.peak), bounds=_bounds(ns), rotation_speed=ns.speed,
        acquisition_delay=ns.delay, quantization=ns.quantization, realtime=ns.clock == "real",
        current_angle=min(max(0.0, ns.lo), ns.hi),
    )
    if ns.stdio:
        serve_stream(state, sys.stdin, sys.stdout)
        return 0
    with RigServer(state, ns.host, ns.port) as server:
        host, port = server.address
        print(f"rig listening on {host}:{port}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return 0


def cmd_calibrate(ns, config: CliConfig, argv: Sequence[str]) -> int:
    cal = calibrate_wa_noise(
        n_trials=ns.trials, screen_trials=ns.screen_trials, base_seed=ns.seed,
        margin=ns.margin, jobs=ns.jobs, log=log.info,
    )
    out = Path(ns.output) if ns.output else _default_output("calibration.json")
    atomic_write_text(out, cal.to_json())
    status = "met" if cal.target_met else "NOT met"
    print(
        f"fwhm {cal.fwhm:g} deg, noise sigma {cal.noise_sigma:g}: WA mean error {cal.mean_error:.3f} deg, "
        f"range {cal.error_range:.3f} deg (target {status}); wrote {out}"
    )
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(ns.verbosity, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    config = CliConfig.from_namespace(ns)
    try:
        return ns.handler(ns, config, argv)
    except (UsageError, InvalidSpec) as exc:
        print(f"pmsearch {ns.subcommand}: {exc}", file=sys.stderr)
        return 2
    except PeakSearchError as exc:
        print(f"pmsearch {ns.subcommand}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
