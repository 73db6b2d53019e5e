"""Log-log slopes of the spectral tail functionals of the Lamperti process.

    python3 scripts/spectral_tails.py --gamma 0.4 --alphas -0.1,0,0.2
"""

import argparse

import numpy as np

from gfbm import GfbmParams, build_table
from gfbm.lamperti import low_second_moment, tail_mass


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=0.4)
    ap.add_argument("--alphas", default="-0.1,0,0.2")
    ap.add_argument("--u-min", type=float, default=10.0)
    ap.add_argument("--u-max", type=float, default=100.0)
    args = ap.parse_args()
    u = np.geomspace(args.u_min, args.u_max, 11)
    print(f"{'alpha':>6} {'tail slope':>11} {'expected':>9} {'low slope':>10} {'expected':>9} {'mass/r0':>8}")
    for a in (float(v) for v in args.alphas.split(",")):
        t = build_table(GfbmParams(a, args.gamma))
        st = np.polyfit(np.log(u), np.log([tail_mass(t, x) for x in u]), 1)[0]
        sl = np.polyfit(np.log(u), np.log([low_second_moment(t, x) for x in u]), 1)[0]
        print(f"{a:6.2f} {st:11.4f} {-(2 * a + 1):9.4f} {sl:10.4f} {1 - 2 * a:9.4f} {t.mass() / t.r0:8.5f}")


if __name__ == "__main__":
    main()
