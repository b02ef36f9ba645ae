#!/usr/bin/env python3
"""Write a 3 x 3 grid of synthetic raw scans and evaluate every search on them.

Pass real scans (CSV with header ``angle_deg,intensity``) as positional
arguments to evaluate those instead.
"""

import argparse
from pathlib import Path

from pmsearch.core import IntensityCurve, ScanBounds
from pmsearch.harness import replay_eval
from pmsearch.oracle import DirectivityModel, load_scan, save_scan
from pmsearch.search import Algorithm, GssMode, SearchSpec


def synthetic_scans(directory: Path, noise: float, seed: int) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    angles = ScanBounds().grid(1.0)
    paths = []
    peaks = [base + off for base in (-8.3, 0.6, 9.2) for off in (-1.45, 0.0, 1.7)]
    for i, peak in enumerate(peaks):
        model = DirectivityModel(peak=peak, noise_sigma=noise, seed=[seed, i])
        path = directory / f"scan_{i // 3}{i % 3}.csv"
        save_scan(IntensityCurve(tuple(angles), tuple(200.0 * model.acquire(a) for a in angles)), path)
        paths.append(path)
    return paths


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scans", nargs="*", type=Path)
    ap.add_argument("--out", type=Path, default=Path("results/scans"))
    ap.add_argument("--noise", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--budget", type=int, default=16)
    ap.add_argument("--resolution", type=float, default=0.1)
    args = ap.parse_args()

    paths = args.scans or synthetic_scans(args.out, args.noise, args.seed)
    curves = [load_scan(p) for p in paths]
    specs = {
        "TS": SearchSpec(algorithm=Algorithm.TERNARY, budget=args.budget),
        "GSS": SearchSpec(algorithm=Algorithm.GSS, budget=args.budget, gss_mode=GssMode.PAIRED_FRESH),
        "WA": SearchSpec(algorithm=Algorithm.WA_OFFLINE, budget=args.budget),
    }
    print(f"{len(curves)} scans, budget {args.budget}, resolution {args.resolution:g} deg")
    for name, spec in specs.items():
        report = replay_eval(curves, spec, args.resolution)
        mean, std = report.summary()
        skipped = f" ({len(report.skipped)} skipped)" if report.skipped else ""
        print(f"{name:>4}: {mean:.2f} ± {std:.2f} deg{skipped}")


if __name__ == "__main__":
    main()
