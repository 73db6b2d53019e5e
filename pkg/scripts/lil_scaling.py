"""Running-max medians of a LIL functional across a dyadic scale ladder.

    python3 scripts/lil_scaling.py --alpha 0.2 --gamma 0.3 --functional endpoint
"""

import argparse

from gfbm import GfbmParams
from gfbm.lilharness import KINDS, LilFunctional, ScaleLadder, estimate_limsup, run_lil_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.2)
    ap.add_argument("--gamma", type=float, default=0.3)
    ap.add_argument("--t0", default="1,4")
    ap.add_argument("--functional", choices=KINDS, default="endpoint")
    ap.add_argument("--kmin", type=int, default=10)
    ap.add_argument("--kmax", type=int, default=30)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    t0s = [float(v) for v in args.t0.split(",")]
    rep = run_lil_experiment(
        GfbmParams(args.alpha, args.gamma), t0s, ScaleLadder(args.kmin, args.kmax),
        LilFunctional(args.functional), None, args.paths, args.seed,
    )
    print("k    " + "  ".join(f"t0={t:<8g}" for t in t0s))
    for j, k in enumerate(rep.ladder.ks):
        print(f"{k:<4d} " + "  ".join(f"{rep.medians(i)[j]:<11.5f}" for i in range(len(t0s))))
    pred = rep.prediction()
    for i, t in enumerate(t0s):
        est = estimate_limsup(rep, i)
        line = f"t0={t:g}: estimate {est.estimate:.4f}, band [{est.band[0]:.3f}, {est.band[1]:.3f}], trend {est.trend_slope:+.3f}"
        if pred is not None:
            line += f", ratio to prediction {est.estimate / pred:.3f}"
        print(line)


if __name__ == "__main__":
    main()
