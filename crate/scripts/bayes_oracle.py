#!/usr/bin/env python3
"""Discrete-prior normal-mean posterior for the free-fall position ranking.

Computes the normal density and Bayes' rule directly (no log space) for a
given observation and prints one posterior per prediction. Used to check
which standard deviation reproduces the reference posterior column.

    python3 scripts/bayes_oracle.py --y 2250 --sigma 400
"""

import argparse
import math

# (upsilon, predicted s at t=3, prior)
ROWS = [
    (1, 2188.36, 0.1), (1, 2205.82, 0.1), (1, 2320.51, 0.1),
    (1, 2337.97, 0.1), (1, 2452.66, 0.1), (1, 2470.12, 0.1),
    (2, 2930.59, 0.05), (2, 2943.44, 0.05), (2, 4991.92, 0.05), (2, 4991.97, 0.05),
    (3, 4778.87, 0.05), (3, 4779.56, 0.05), (3, 4944.72, 0.05), (3, 4944.89, 0.05),
]

REFERENCE = [
    0.16718810150932492, 0.1681562049268911, 0.16657680628838295,
    0.16514261552369686, 0.14880635482534424, 0.14541298913266534,
    0.019892388507915363, 0.018824538899522295,
]


def density(y, mu, sigma):
    return math.exp(-((y - mu) ** 2) / (2 * sigma ** 2)) / math.sqrt(2 * math.pi * sigma ** 2)


def posteriors(y, sigma):
    joint = [p * density(y, mu, sigma) for _, mu, p in ROWS]
    total = sum(joint)
    if total == 0.0:
        raise SystemExit(f"every likelihood underflows at sigma={sigma}")
    return [j / total for j in joint]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--y", type=float, default=2250.0)
    ap.add_argument("--sigma", type=float, nargs="+", default=[20.0, 400.0])
    args = ap.parse_args()
    for sigma in args.sigma:
        post = posteriors(args.y, sigma)
        worst = max(abs(a - b) for a, b in zip(post, REFERENCE))
        print(f"sigma={sigma:g}  max |posterior - reference| over the first 8 rows = {worst:.3g}")
        for (u, mu, prior), p in zip(ROWS, post):
            print(f"  upsilon={u}  s={mu:8.2f}  prior={prior:.3f}  posterior={p:.6f}")


if __name__ == "__main__":
    main()
