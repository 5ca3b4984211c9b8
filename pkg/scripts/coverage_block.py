"""One sigma block of the coverage study: ours at three xi levels plus competitors.

    python3 scripts/coverage_block.py --sigma 1 --n 100 --sims 200 --boot 499 --threads 4
"""

import argparse
import time

from bandforge.simulation import GAMMA_GRID, LAMBDA_GRID, MethodSpec, StudyConfig, run_study


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--sims", type=int, default=200)
    p.add_argument("--boot", type=int, default=499)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--competitors", action="store_true", help="add the undersmoothing and bias-correction sweeps")
    args = p.parse_args()

    methods = [MethodSpec("ours"), MethodSpec("naive")]
    if args.competitors:
        methods += [MethodSpec("undersmooth", GAMMA_GRID), MethodSpec("biascorrect", LAMBDA_GRID)]
    print("g  method       param  covered  abs_err  width   best")
    for g in (1, 2, 3):
        t0 = time.perf_counter()
        cfg = StudyConfig(g_index=g, n=args.n, sigma=args.sigma, n_sims=args.sims, B=args.boot,
                          seed=args.seed, methods=tuple(methods))
        for r in run_study(cfg, args.threads):
            if r.method in ("undersmooth", "biascorrect") and not r.extra.get("best"):
                continue
            param = 1 - r.param if r.method == "ours" else r.param
            print(f"{g}  {r.method:<11} {param:6.2f}  {r.covered_proportion:7.3f}  {r.avg_abs_cov_error:7.3f}  "
                  f"{r.avg_width:6.3f}  {'*' if r.extra.get('best') else ''}")
        print(f"# g{g}: {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
