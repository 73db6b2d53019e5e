"""Table of the local variance constant c21 against the gamma = 0 closed form.

    python3 scripts/c21_table.py --gamma 0.3
"""

import argparse
import math

import numpy as np
from scipy.special import gamma as G

from gfbm import GfbmParams
from gfbm.kernelcov import c21


def reference(alpha):
    H = alpha + 0.5
    return 0.5 * G(H + 0.5) ** 2 / (G(2 * H + 1) * math.sin(math.pi * H))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=0.3)
    ap.add_argument("--n", type=int, default=9)
    args = ap.parse_args()
    lo = -0.5 + args.gamma / 2
    print(f"{'alpha':>8} {'c21(t0=1)':>12} {'c21(t0=2)':>12} {'reference':>12} {'rel diff':>9}")
    for a in np.linspace(lo + 0.05, 0.45, args.n):
        p = GfbmParams(round(a, 4), args.gamma)
        c1, c2, ref = c21(p), c21(p, t0=2.0), reference(p.alpha)
        print(f"{p.alpha:8.4f} {c1:12.7f} {c2:12.7f} {ref:12.7f} {abs(c1 / ref - 1):9.1e}")


if __name__ == "__main__":
    main()
