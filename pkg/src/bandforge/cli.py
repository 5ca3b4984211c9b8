"""``bandforge`` command line: ``band``, ``density-band`` and ``simulate``.

Exit codes: 0 ok, 2 malformed input, 3 degenerate fit, 4 invalid configuration.
Failures print one line ``bandforge: error code=<c> kind=<kind> reason=<text>``
on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import io, rng
from .bandwidth import select_bandwidth
from .calibration import calibrate, final_band, hetero_estimate, make_hetero_bootstrap, make_residual_bootstrap
from .density import density_band_calibrate
from .errors import BandError
from .estimators import Dataset, fit_curve
from .kernels import KERNELS, get_kernel
from .naive import build_naive_band
from .percentile import double_bootstrap_calibrate
from .simulation import MethodSpec, StudyConfig, run_study

EXIT_INPUT, EXIT_DEGENERATE, EXIT_CONFIG = 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, reason: str):
        super().__init__(reason)
        self.code, self.kind, self.reason = code, kind, reason


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors, not argparse's default exit 2
    def error(self, message):
        raise CliError(EXIT_CONFIG, "config", message)


class _Timer:
    def __init__(self):
        self.stages: dict[str, float] = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        yield
        self.stages[name] = time.perf_counter() - t0


def _threads(args) -> int:
    if args.threads is not None:
        t = args.threads
    else:
        env = os.environ.get("BANDFORGE_THREADS", "1")
        try:
            t = int(env)
        except ValueError:
            raise CliError(EXIT_CONFIG, "config", f"BANDFORGE_THREADS={env!r} is not an integer") from None
    if t < 1:
        raise CliError(EXIT_CONFIG, "config", f"threads must be >= 1, got {t}")
    return t


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    s = rng.fresh_seed()
    print(f"bandforge: seed={s}", file=sys.stderr)
    return s


def _bandwidth_rule(text: str):
    if text in ("plugin", "cv"):
        return text
    try:
        h = float(text)
    except ValueError:
        raise CliError(EXIT_CONFIG, "config", f"--bandwidth must be plugin, cv or a number, got {text!r}") from None
    if not (h > 0 and np.isfinite(h)):
        raise CliError(EXIT_CONFIG, "config", f"--bandwidth must be positive, got {text!r}")
    return h


def _check_common(args):
    if not 0.0 < args.alpha0 < 1.0:
        raise CliError(EXIT_CONFIG, "config", f"--alpha0 must lie in (0, 1), got {args.alpha0}")
    if not 0.0 < args.xi <= 0.5:
        raise CliError(EXIT_CONFIG, "config", f"--xi must lie in (0, 0.5], got {args.xi}")
    if args.boot < 1:
        raise CliError(EXIT_CONFIG, "config", f"--boot must be >= 1, got {args.boot}")
    if args.grid < 1:
        raise CliError(EXIT_CONFIG, "config", f"--grid must be >= 1, got {args.grid}")
    if args.region is not None and not args.region[0] < args.region[1]:
        raise CliError(EXIT_CONFIG, "config", f"--region needs a < b, got {args.region}")


def _grid(args, x):
    a, b = args.region if args.region is not None else (float(x.min()), float(x.max()))
    return np.linspace(a, b, args.grid)


def _finish(args, command, seed, t0, timer, out_header, out_cols, **extra):
    io.write_table(args.out, out_header, out_cols)
    if args.manifest:
        cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
        cfg["threads"] = _threads(args)
        io.write_json(args.manifest, io.manifest(command, cfg, seed, time.perf_counter() - t0, timer.stages, **extra))


def cmd_band(args) -> int:
    t0, timer = time.perf_counter(), _Timer()
    _check_common(args)
    rule = _bandwidth_rule(args.bandwidth)
    threads = _threads(args)
    if args.hetero and args.method != "calibrated":
        raise CliError(EXIT_CONFIG, "config", "--hetero applies only to --method calibrated")
    cols = io.read_columns(args.input, ("x", "y"))
    try:
        data = Dataset(cols["x"], cols["y"])
    except ValueError as exc:
        raise CliError(EXIT_INPUT, "input", str(exc)) from None
    seed = _seed(args)
    grid = _grid(args, data.x)
    with timer.stage("bandwidth"):
        try:
            bw = select_bandwidth(data, rule, args.kernel)
        except ValueError as exc:
            raise CliError(EXIT_CONFIG, "config", str(exc)) from None
    with timer.stage("fit"):
        est = fit_curve(data, bw.h, grid, args.kernel, args.variance)
    extra = {"bandwidth": bw.h, "bandwidth_method": bw.method}
    with timer.stage("bands"):
        if args.method == "naive":
            band = build_naive_band(est, args.alpha0)
        elif args.method == "percentile":
            try:
                res = double_bootstrap_calibrate(data, est, args.boot, args.boot2, args.alpha0, args.xi, seed)
            except ValueError as exc:
                raise CliError(EXIT_CONFIG, "config", str(exc)) from None
            band = res.band
            extra["alpha_hat_xi"] = res.profile.alpha_hat_xi
        else:
            if args.hetero:
                est, sig_x = hetero_estimate(data, est)
                ens = make_hetero_bootstrap(data, est, sig_x, args.boot, seed, workers=threads)
            else:
                ens = make_residual_bootstrap(data, est, args.boot, seed, workers=threads)
            prof = calibrate(ens, grid, args.alpha0, args.xi)
            band = final_band(est, prof)
            extra["alpha_hat_xi"] = prof.alpha_hat_xi
    _finish(args, "band", seed, t0, timer, ["x", "ghat", "lower", "upper"],
            [band.grid, band.center, band.lower, band.upper], **extra)
    return 0


def cmd_density_band(args) -> int:
    t0, timer = time.perf_counter(), _Timer()
    _check_common(args)
    rule = _bandwidth_rule(args.bandwidth)
    _threads(args)
    if rule == "cv":
        raise CliError(EXIT_CONFIG, "config", "density bands support --bandwidth plugin (Silverman) or a number")
    cols = io.read_columns(args.input, ("x",))
    x = cols["x"]
    seed = _seed(args)
    grid = _grid(args, x)
    h = None if rule == "plugin" else rule
    with timer.stage("bands"):
        band, prof = density_band_calibrate(x, h, grid, args.alpha0, args.xi, args.boot, seed, args.kernel, args.clamp)
    _finish(args, "density-band", seed, t0, timer, ["x", "fhat", "lower", "upper"],
            [band.grid, band.fhat, band.lower, band.upper], bandwidth=band.h, alpha_hat_xi=prof.alpha_hat_xi)
    return 0


_SCALAR_FIELDS = {
    "g_index": int, "n": int, "sigma": float, "n_sims": int, "B": int, "alpha0": float,
    "grid_size": int, "seed": int, "bandwidth": str, "kernel": str, "variance": str, "full_scale": bool,
}
_SWEEP_FIELDS = ("g_index", "n", "sigma")


def _typed(field, value, kind):
    ok = isinstance(value, kind) and not (kind is not bool and isinstance(value, bool))
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        ok = True
    if not ok:
        raise CliError(EXIT_CONFIG, "schema", f"field {field}: expected {kind.__name__}, got {value!r}")
    return kind(value)


def load_study_configs(payload: dict) -> list[StudyConfig]:
    """Validate a simulate config; ``g_index``, ``n`` and ``sigma`` may be lists (a sweep)."""
    if not isinstance(payload, dict):
        raise CliError(EXIT_CONFIG, "schema", "config must be a JSON object")
    allowed = set(_SCALAR_FIELDS) | {"schema_version", "xi_list", "region", "methods"}
    for key in payload:
        if key not in allowed:
            raise CliError(EXIT_CONFIG, "schema", f"field {key}: unknown field")
    if payload.get("schema_version", 1) != 1:
        raise CliError(EXIT_CONFIG, "schema", "field schema_version: only version 1 is supported")
    base, sweeps = {}, {}
    for key, kind in _SCALAR_FIELDS.items():
        if key not in payload:
            continue
        v = payload[key]
        if key in _SWEEP_FIELDS and isinstance(v, list):
            if not v:
                raise CliError(EXIT_CONFIG, "schema", f"field {key}: empty sweep")
            sweeps[key] = [_typed(key, u, kind) for u in v]
        else:
            base[key] = _typed(key, v, kind)
    if "xi_list" in payload:
        v = payload["xi_list"]
        if not isinstance(v, list) or not v:
            raise CliError(EXIT_CONFIG, "schema", "field xi_list: expected a nonempty list")
        base["xi_list"] = tuple(_typed("xi_list", u, float) for u in v)
    if "region" in payload:
        v = payload["region"]
        if not isinstance(v, list) or len(v) != 2:
            raise CliError(EXIT_CONFIG, "schema", "field region: expected [a, b]")
        base["region"] = tuple(_typed("region", u, float) for u in v)
    if "methods" in payload:
        v = payload["methods"]
        if not isinstance(v, list) or not v:
            raise CliError(EXIT_CONFIG, "schema", "field methods: expected a nonempty list")
        specs = []
        for j, m in enumerate(v):
            m = {"name": m} if isinstance(m, str) else m
            if not isinstance(m, dict) or set(m) - {"name", "factors", "B2"}:
                raise CliError(EXIT_CONFIG, "schema", f"field methods[{j}]: expected name/factors/B2")
            try:
                specs.append(MethodSpec(**m))
            except (TypeError, ValueError) as exc:
                raise CliError(EXIT_CONFIG, "schema", f"field methods[{j}]: {exc}") from None
        base["methods"] = tuple(specs)
    if base.get("kernel", "epanechnikov") not in KERNELS:
        raise CliError(EXIT_CONFIG, "schema", f"field kernel: unknown kernel {base['kernel']!r}")
    if base.get("variance", "rice") not in ("rice", "residual"):
        raise CliError(EXIT_CONFIG, "schema", "field variance: expected rice or residual")
    if "bandwidth" in base:
        try:
            _bandwidth_rule(base["bandwidth"])
        except CliError:
            raise CliError(EXIT_CONFIG, "schema", f"field bandwidth: invalid rule {base['bandwidth']!r}") from None

    combos = [{}]
    for key in _SWEEP_FIELDS:
        if key in sweeps:
            combos = [{**c, key: v} for c in combos for v in sweeps[key]]
    out = []
    for c in combos:
        try:
            out.append(StudyConfig(**{**base, **c}))
        except ValueError as exc:
            raise CliError(EXIT_CONFIG, "schema", f"config: {exc}") from None
    return out


def cmd_simulate(args) -> int:
    t0, timer = time.perf_counter(), _Timer()
    threads = _threads(args)
    try:
        with open(args.config) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_INPUT, "input", f"cannot read {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, "input", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    cfgs = load_study_configs(payload)
    os.makedirs(args.outdir, exist_ok=True)
    rows, per_x = [], []
    for k, cfg in enumerate(cfgs):
        with timer.stage(f"setting_{k}"):
            results = run_study(cfg, threads)
        for r in results:
            rows.append((cfg.sigma, cfg.g_index, cfg.n, r.method, r.param, r.covered_proportion,
                         r.avg_abs_cov_error, r.avg_width, r.n_ok, bool(r.extra.get("best", False))))
            per_x.append({
                "sigma": cfg.sigma, "g_index": cfg.g_index, "n": cfg.n, "method": r.method,
                "factor_or_xi": r.param, "grid": cfg.grid, "coverage": r.coverage, "n_ok": r.n_ok,
            })
    header = ["sigma", "g_index", "method", "factor_or_xi", "covered_proportion",
              "avg_abs_cov_error", "avg_width", "n", "n_ok", "best"]
    lines = [",".join(header)]
    for s, g, n, m, p, cp, err, w, nok, best in rows:
        lines.append(",".join([io.fmt(s), str(g), m, io.fmt(p), io.fmt(cp), io.fmt(err), io.fmt(w),
                               str(n), str(nok), str(int(best))]))
    with open(os.path.join(args.outdir, "results.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    io.write_json(os.path.join(args.outdir, "results.json"), {
        "schema": io.RESULTS_SCHEMA,
        "configs": [dataclasses.asdict(c) for c in cfgs],
        "results": per_x,
    })
    io.write_json(os.path.join(args.outdir, "manifest.json"), io.manifest(
        "simulate", {"config": payload, "threads": threads}, payload.get("seed", 0),
        time.perf_counter() - t0, timer.stages))
    return 0


def _common(p, density: bool):
    p.add_argument("input", help="CSV with header x" + ("" if density else ",y"))
    p.add_argument("--alpha0", type=float, default=0.05, help="nominal miscoverage")
    p.add_argument("--xi", type=float, default=0.1, help="fraction of points allowed to undercover")
    p.add_argument("--boot", type=int, default=999, help="bootstrap replicates B")
    p.add_argument("--bandwidth", default="plugin", help="plugin, cv or a positive number")
    p.add_argument("--kernel", default="gaussian" if density else "epanechnikov", choices=sorted(KERNELS))
    p.add_argument("--region", type=float, nargs=2, metavar=("A", "B"), help="grid endpoints (default: data range)")
    p.add_argument("--grid", type=int, default=91, help="number of grid points")
    p.add_argument("--seed", type=int, default=None, help="master seed (random and printed if omitted)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (env BANDFORGE_THREADS)")
    p.add_argument("--out", default="-", help="band CSV path ('-' for stdout)")
    p.add_argument("--manifest", default=None, help="manifest JSON path")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bandforge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("band", help="regression band from x,y data")
    _common(b, density=False)
    b.add_argument("--method", default="calibrated", choices=["calibrated", "naive", "percentile"])
    b.add_argument("--hetero", action="store_true", help="heteroscedastic wild-scaled bootstrap")
    b.add_argument("--variance", default="rice", choices=["rice", "residual"])
    b.add_argument("--boot2", type=int, default=99, help="inner replicates for --method percentile")
    b.set_defaults(func=cmd_band)

    d = sub.add_parser("density-band", help="density band from a sample x")
    _common(d, density=True)
    d.add_argument("--clamp", action="store_true", help="clamp lower envelope at zero")
    d.set_defaults(func=cmd_density_band)

    s = sub.add_parser("simulate", help="coverage study from a JSON config")
    s.add_argument("config")
    s.add_argument("--outdir", default=".", help="directory for results.csv, results.json, manifest.json")
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_simulate)
    return p


def _fail(code: int, kind: str, reason: str) -> int:
    reason = " ".join(str(reason).split())
    print(f"bandforge: error code={code} kind={kind} reason={reason}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if hasattr(args, "kernel"):
            get_kernel(args.kernel)
        return args.func(args)
    except CliError as exc:
        return _fail(exc.code, exc.kind, exc.reason)
    except io.MalformedInput as exc:
        return _fail(EXIT_INPUT, "input", str(exc))
    except BandError as exc:
        return _fail(EXIT_DEGENERATE, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
