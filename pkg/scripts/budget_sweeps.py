#!/usr/bin/env python3
"""Error-vs-budget sweeps for GSS, TS and the offline weighted average.

All three run on the calibrated noisy model, so the curves are directly
comparable. Writes one CSV (+ .meta, plot script) per algorithm into
the output directory and prints a side-by-side summary.
"""

import argparse
from pathlib import Path

from pmsearch.harness import TrialSpec, load_calibration, sweep_budgets, write_sweep
from pmsearch.search import Algorithm, GssMode, SearchSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noiseless", action="store_true", help="drop the calibrated noise")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cal = load_calibration()
    model = cal.model()
    if args.noiseless:
        model = type(model)(profile=model.profile, fwhm=model.fwhm)
    runs = {
        "gss": (SearchSpec(algorithm=Algorithm.GSS, budget=2, gss_mode=GssMode.PAIRED_FRESH), range(2, 29, 2)),
        "ts": (SearchSpec(algorithm=Algorithm.TERNARY, budget=2), range(2, 29, 2)),
        "wa": (SearchSpec(algorithm=Algorithm.WA_OFFLINE, budget=8, threshold=cal.threshold), range(8, 29, 2)),
    }
    tables = {}
    for name, (search, budgets) in runs.items():
        spec = TrialSpec(model, search, n_trials=args.trials, margin=cal.margin, base_seed=args.seed)
        tables[name] = sweep_budgets(spec, budgets, jobs=args.jobs)
        paths = write_sweep(tables[name], args.out / f"sweep_{name}.csv")
        print(f"wrote {paths[0]}")

    print(f"\nmodel: fwhm {model.fwhm:g} deg, noise sigma {model.noise_sigma:g}, {args.trials} trials per budget")
    print(f"{'budget':>6} {'GSS':>8} {'TS':>8} {'WA':>8}")
    for budget in range(2, 29, 2):
        cells = []
        for name in ("gss", "ts", "wa"):
            row = next((r for r in tables[name].rows if r.budget == budget), None)
            cells.append(f"{row.mean_error:8.3f}" if row else f"{'':>8}")
        print(f"{budget:>6} " + " ".join(cells))
    wa = tables["wa"].mean_errors
    print(f"\nWA budget-averaged error {sum(wa) / len(wa):.3f} deg, range {max(wa) - min(wa):.3f} deg")


if __name__ == "__main__":
    main()
