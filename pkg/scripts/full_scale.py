"""Full-scale coverage study: 1000 simulations for every (sigma, n, g) setting.

Writes one CSV per setting via ``bandforge simulate``. Expect hours.

    python3 scripts/full_scale.py --outdir runs/full --threads 8
"""

import argparse
import json
import os

from bandforge.cli import main as cli_main
from bandforge.simulation import GAMMA_GRID, GAMMA_GRID_COARSE, LAMBDA_GRID, LAMBDA_GRID_COARSE


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--outdir", default="runs/full")
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--boot", type=int, default=499)
    p.add_argument("--n", type=int, nargs="+", default=[100, 200, 400])
    args = p.parse_args()
    for n in args.n:
        gammas, lambdas = (GAMMA_GRID, LAMBDA_GRID) if n <= 100 else (GAMMA_GRID_COARSE, LAMBDA_GRID_COARSE)
        for sigma in (1.0, 0.5, 0.2):
            out = os.path.join(args.outdir, f"n{n}_sigma{sigma:g}")
            os.makedirs(out, exist_ok=True)
            cfg = {
                "g_index": [1, 2, 3], "n": n, "sigma": sigma, "n_sims": 1000, "B": args.boot, "seed": 0,
                "methods": ["ours", "naive", {"name": "undersmooth", "factors": list(gammas)},
                            {"name": "biascorrect", "factors": list(lambdas)}],
            }
            path = os.path.join(out, "config.json")
            with open(path, "w") as fh:
                json.dump(cfg, fh, indent=2)
            code = cli_main(["simulate", path, "--outdir", out, "--threads", str(args.threads)])
            if code:
                raise SystemExit(code)


if __name__ == "__main__":
    main()
