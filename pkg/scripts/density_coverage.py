"""Monte Carlo coverage of calibrated density bands for standard normal samples.

    python3 scripts/density_coverage.py --n 200 --studies 200 --boot 499
"""

import argparse

import numpy as np

from bandforge.density import standard_normal_coverage_study


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--studies", type=int, default=200)
    p.add_argument("--boot", type=int, default=499)
    p.add_argument("--alpha0", type=float, default=0.05)
    p.add_argument("--xi", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    res = standard_normal_coverage_study(args.n, None, args.studies, args.alpha0, args.xi, args.boot, args.seed)
    for x, c in zip(res.grid, res.coverage):
        print(f"{x:6.2f}  {c:.3f}")
    print(f"# grid points with coverage >= {1 - args.alpha0:.2f}: {res.fraction_at_least(1 - args.alpha0):.3f}")
    print(f"# runs with alpha_hat <= alpha0: {np.mean(res.alpha_hat <= args.alpha0):.3f}")


if __name__ == "__main__":
    main()
