#!/usr/bin/env python3
"""Online weighted average: acquisitions spent before the scan passes the peak."""

import argparse

import numpy as np

from pmsearch.oracle import DirectivityModel
from pmsearch.search import Algorithm, SearchSpec, run_search


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--step", type=float, default=5.0)
    ap.add_argument("--threshold", type=float, default=0.2)
    ap.add_argument("--fwhm", type=float, default=8.66)
    ap.add_argument("--offset", type=float, default=1.3, help="shift of the peak grid off the sampling grid")
    args = ap.parse_args()

    spec = SearchSpec(algorithm=Algorithm.WA_ONLINE, step=args.step, threshold=args.threshold)
    model = DirectivityModel(fwhm=args.fwhm)
    acqs, errors = [], []
    print(f"{'peak':>7} {'estimate':>9} {'error':>7} {'acq':>4}  termination")
    for peak in np.linspace(-10, 10, 9) + args.offset:
        out = run_search(model.with_peak(float(peak)), spec)
        err = abs(out.estimate - peak)
        acqs.append(out.acquisitions)
        errors.append(err)
        print(f"{peak:7.2f} {out.estimate:9.3f} {err:7.3f} {out.acquisitions:4d}  {out.termination.value}")
    print(f"\nmean acquisitions {np.mean(acqs):.2f}, mean error {np.mean(errors):.3f} "
          f"± {np.std(errors, ddof=1):.3f} deg")


if __name__ == "__main__":
    main()
