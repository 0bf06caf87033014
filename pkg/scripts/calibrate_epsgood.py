#!/usr/bin/env python3
"""Monte Carlo calibration for the goodness-checker acceptance thresholds.

Run before freezing the thresholds asserted in tests/test_epsgood.py and the
acceptance suite. Samples Haar unitaries on C^2 (x) C^256 and records how
often the per-vector and k=2 tuple checkers accept at eps = 0.3.

Recorded run (seeds 0..199 per-vector, 0..49 tuple):
    per-vector acceptance: 200/200 = 1.000
    tuple k=2 acceptance:  50/50  = 1.000
Frozen test threshold: >= 0.9 acceptance rate.
"""

import argparse

import numpy as np

from qtpe.epsgood import is_good_for_vector, is_tuple_good
from qtpe.linalg import SeededRng, haar_unitary


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--vector-trials", type=int, default=200)
    parser.add_argument("--tuple-trials", type=int, default=50)
    parser.add_argument("--d", type=int, default=2)
    parser.add_argument("--dprime", type=int, default=256)
    parser.add_argument("--eps", type=float, default=0.3)
    args = parser.parse_args()

    n = args.d * args.dprime
    x0 = np.zeros(n, dtype=complex)
    x0[0] = 1.0

    accepted = 0
    for seed in range(args.vector_trials):
        u = haar_unitary(n, SeededRng(seed, 900))
        accepted += is_good_for_vector(u, x0, args.d, args.dprime, args.eps).good
    print(f"per-vector acceptance: {accepted}/{args.vector_trials} = {accepted/args.vector_trials:.3f}")

    accepted_t = 0
    for seed in range(args.tuple_trials):
        us = [haar_unitary(n, SeededRng(seed, 902 + i)) for i in range(2)]
        accepted_t += is_tuple_good(us, args.d, args.dprime, args.eps).good
    print(f"tuple k=2 acceptance:  {accepted_t}/{args.tuple_trials} = {accepted_t/args.tuple_trials:.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
