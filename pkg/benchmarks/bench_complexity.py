"""Wall time of one full solve against graph size.

Times both eigendecompositions, the wavelet frames, the matched dictionary
and the solve for square problems (N_s = N_t = n), then fits the slope of
log(time) on log(n). A dense pipeline should land near 3 for large n.

    python3 benchmarks/bench_complexity.py --sizes 100,200,400,800
"""

import argparse
import csv
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from gralp.experiments import complexity_slope


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,200,400,800")
    ap.add_argument("--rounds", type=int, default=5, help="round-robin passes; best time per size is kept")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1)")
    ap.add_argument("--csv", help="also write n,seconds rows here")
    args = ap.parse_args(argv)
    sizes = tuple(int(s) for s in args.sizes.split(","))

    with threadpool_limits(args.threads):
        times, slope = complexity_slope(sizes, rounds=args.rounds, seed=args.seed)

    print(f"{'n':>6} {'seconds':>12} {'local slope':>12}")
    for i, (n, t) in enumerate(zip(sizes, times)):
        local = "" if i == 0 else f"{np.log(t / times[i - 1]) / np.log(n / sizes[i - 1]):12.2f}"
        print(f"{n:>6} {t:12.6f} {local}")
    print(f"log-log slope: {slope:.3f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "seconds"])
            w.writerows((n, repr(float(t))) for n, t in zip(sizes, times))
    return 0


if __name__ == "__main__":
    sys.exit(main())
