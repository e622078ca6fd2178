"""Command line front end.

One process per invocation; verbs map one-to-one onto module
operations.  All randomness flows through ``--seed``, and every output
file carries the tool version, a short hash of the invocation
parameters, and the seed, so identical invocations produce
byte-identical files (per-replicate wall times are zeroed in file
output for that reason; use --verbose for timing).

Exit codes: 0 on success, 1 on runtime failure (the message names the
violated precondition), 2 on argument errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .cech import build_cech, euler_characteristic_full, face_counts
from .critical import critical_counts, enumerate_critical_points, save_critical_points
from .errors import CechMorseError
from .experiments import (
    aggregate,
    config_hash,
    coverage_probe,
    load_config,
    recovery_experiment,
    records_to_jsonl,
    run_regime,
    summary_to_csv,
)
from .homology import betti_numbers
from .limits import (
    LimitConstants,
    constants_to_csv,
    euler_limit_curve_m3,
    gamma_closed_form_m3,
    gamma_numeric,
    mu_b_estimate,
    mu_c_estimate,
)
from .sampling import (
    Binomial,
    DensitySpec,
    ManifoldSpec,
    PointCloud,
    Poisson,
    sample,
)


class _Timer:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.last = time.perf_counter()

    def stage(self, name: str) -> None:
        now = time.perf_counter()
        if self.enabled:
            print(f"[{name}] {now - self.last:.2f}s", file=sys.stderr)
        self.last = now


def _invocation_hash(args: argparse.Namespace) -> str:
    skip = {"func", "out", "verbose", "jobs"}
    payload = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _meta(args: argparse.Namespace, seed=None) -> dict:
    out = {"tool_version": __version__, "config_hash": _invocation_hash(args)}
    if seed is not None:
        out["seed"] = int(seed)
    return out


def _manifold_from_args(args) -> ManifoldSpec:
    data = {"kind": args.manifold, "m": args.m}
    for key in ("side", "radius", "major", "minor"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    return ManifoldSpec.from_dict(data)


def _cmd_sample(args) -> int:
    spec = _manifold_from_args(args)
    mode = Poisson(args.n) if args.poisson else Binomial(args.n)
    cloud = sample(spec, density=DensitySpec.uniform(spec), mode=mode, seed=args.seed)
    cloud.save(args.out, extra=_meta(args, seed=args.seed))
    print(f"sampled {cloud.size} points on {spec.kind} -> {args.out}")
    return 0


def _cmd_cech(args) -> int:
    timer = _Timer(args.verbose)
    cloud = PointCloud.load(args.cloud)
    timer.stage("load")
    cx = build_cech(cloud, args.r, max_dim=args.max_dim)
    timer.stage("build")
    if args.out:
        cx.save(args.out, extra=_meta(args, seed=cloud.seed))
        timer.stage("write")
    print(f"face counts = {face_counts(cx)}")
    return 0


def _cmd_betti(args) -> int:
    timer = _Timer(args.verbose)
    cloud = PointCloud.load(args.cloud)
    max_k = args.max_k if args.max_k is not None else cloud.spec.m
    cx = build_cech(cloud, args.r, max_dim=max_k + 1)
    timer.stage("build")
    betti = betti_numbers(cx, max_k)
    timer.stage("reduce")
    print(f"beta={tuple(betti)}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(
                {
                    "format": "cechmorse.betti.v1",
                    **_meta(args, seed=cloud.seed),
                    "r": args.r,
                    "betti": list(betti),
                },
                fh,
            )
    return 0


def _cmd_crit(args) -> int:
    timer = _Timer(args.verbose)
    cloud = PointCloud.load(args.cloud)
    cps = enumerate_critical_points(
        cloud, args.r, max_index=args.max_index, method=args.method
    )
    timer.stage("enumerate")
    top = args.max_index if args.max_index is not None else cloud.ambient_dim
    counts = [0] * (top + 1)
    for cp in cps:
        counts[cp.k] += 1
    print(f"N=({','.join(str(c) for c in counts)})")
    if args.out:
        save_critical_points(cps, args.out, extra=_meta(args, seed=cloud.seed))
    return 0


def _cmd_euler(args) -> int:
    timer = _Timer(args.verbose)
    cloud = PointCloud.load(args.cloud)
    chi_m = chi_c = None
    if args.method in ("morse", "both"):
        counts = critical_counts(cloud, args.r)
        chi_m = int(sum((-1) ** k * c for k, c in enumerate(counts)))
        timer.stage("morse")
        print(f"chi_morse={chi_m}")
    if args.method in ("complex", "both"):
        chi_c = int(euler_characteristic_full(cloud, args.r))
        timer.stage("complex")
        print(f"chi_cech={chi_c}")
    if chi_m is not None and chi_c is not None and chi_m != chi_c:
        raise CechMorseError(
            f"Euler characteristic mismatch: complex {chi_c} vs critical points {chi_m}"
        )
    return 0


def _cmd_limits(args) -> int:
    rows: list[LimitConstants] = []
    if args.constant == "euler_curve":
        lams = [float(x) for x in args.lambdas.split(",") if x]
        curve = euler_limit_curve_m3(lams)
        for rec in curve:
            print(f"{rec['lambda']:g},{rec['chi_per_point']:.6f}")
        if args.out:
            with open(args.out, "w") as fh:
                fh.write("lambda,chi_per_point\n")
                for rec in curve:
                    fh.write(f"{rec['lambda']:g},{rec['chi_per_point']:.10g}\n")
        return 0
    if args.constant == "gamma":
        if args.lam is None:
            raise ValueError("gamma needs --lambda")
        lam = float("inf") if args.lam in ("inf", "oo") else float(args.lam)
        closed_ok = args.m == 3 and args.k in (1, 2, 3)
        if args.method == "closed" or (args.method == "auto" and closed_ok):
            value = gamma_closed_form_m3(args.k, lam)
            rows.append(
                LimitConstants(args.m, args.k, lam, value, 0.0, "closed_form", 0, None)
            )
        else:
            rows.append(gamma_numeric(args.m, args.k, lam, args.n_mc, args.seed))
    elif args.constant == "mu_c":
        rows.append(mu_c_estimate(args.m, args.k, args.n_mc, args.seed))
    else:
        rows.append(mu_b_estimate(args.m, args.k, args.n_mc, args.seed))
    for row in rows:
        print(f"{row.value:.4f}")
        if args.verbose:
            print(f"stderr={row.stderr:.2e} method={row.method}", file=sys.stderr)
    if args.out:
        constants_to_csv(rows, args.out)
    return 0


def _strip_timing(records):
    return [replace(rec, wall_time=0.0) for rec in records]


def _cmd_regime(args) -> int:
    config = load_config(args.config)
    records = run_regime(config, jobs=args.jobs)
    failures = sum(rec.error is not None for rec in records)
    print(f"{len(records)} records, {failures} failed")
    if args.out:
        header = _meta(args, seed=config.base_seed)
        header["config_hash"] = config_hash(config)
        records_to_jsonl(_strip_timing(records), args.out, header=header)
    if args.summary:
        rows = aggregate(records, args.normalization, args.k)
        summary_to_csv(rows, args.summary)
        for row in rows:
            print(
                f"n={row['n']} mean={row['mean']:.6g} var={row['variance']:.6g} "
                f"ratio={row['var_mean_ratio']:.4g}"
            )
    return 0


def _cmd_coverage(args) -> int:
    cloud = PointCloud.load(args.cloud)
    eps_net = args.eps_net if args.eps_net is not None else args.r / 4.0
    flag = coverage_probe(cloud, args.r, eps_net)
    print(f"covered={str(flag).lower()}")
    return 0


def _cmd_recover(args) -> int:
    config = load_config(args.config)
    table = recovery_experiment(config, jobs=args.jobs)
    print(f"expected beta={table['expected']}")
    print(f"success_rate={table['success_rate']:.3f}")
    if args.out:
        payload = {
            "format": "cechmorse.recovery.v1",
            **_meta(args, seed=config.base_seed),
            "expected": list(table["expected"]),
            "success_rate": table["success_rate"],
            "replicates": [
                {**row, "betti": None if row["betti"] is None else list(row["betti"])}
                for row in table["replicates"]
            ],
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh)
    return 0


def _add_manifold_options(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--manifold",
        required=True,
        choices=["flat_torus", "circle", "sphere", "embedded_torus"],
    )
    p.add_argument("--m", type=int, default=2, help="intrinsic dimension (flat torus)")
    p.add_argument("--side", type=float, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--major", type=float, default=None)
    p.add_argument("--minor", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cechmorse",
        description="Cech complexes, homology, and distance-function "
        "critical points of sampled manifolds",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("sample", help="draw a point cloud and write it as JSON")
    _add_manifold_options(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--poisson", action="store_true", help="Poisson-distributed size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("cech", help="build the Cech complex of a cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--max-dim", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_cech)

    p = sub.add_parser("betti", help="Betti numbers of the Cech complex")
    p.add_argument("--cloud", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--max-k", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_betti)

    p = sub.add_parser("crit", help="critical points of the distance function")
    p.add_argument("--cloud", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--max-index", type=int, default=None)
    p.add_argument(
        "--method", default="auto", choices=["auto", "expansion", "delaunay", "brute"]
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_crit)

    p = sub.add_parser("euler", help="Euler characteristic at a radius")
    p.add_argument("--cloud", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--method", default="morse", choices=["morse", "complex", "both"])
    p.set_defaults(func=_cmd_euler)

    p = sub.add_parser("limits", help="limit constants, closed form or Monte Carlo")
    p.add_argument(
        "--constant",
        default="gamma",
        choices=["gamma", "mu_c", "mu_b", "euler_curve"],
    )
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--lambda", dest="lam", default=None, help="occupancy, or 'inf'")
    p.add_argument(
        "--lambdas", default="0,0.5,1,2,4", help="grid for the Euler curve CSV"
    )
    p.add_argument(
        "--method", default="auto", choices=["auto", "closed", "mc"],
        help="closed form needs m=3 and k in 1..3",
    )
    p.add_argument("--n-mc", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=_cmd_limits)

    p = sub.add_parser("regime", help="run a replicated regime sweep from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="records JSONL path")
    p.add_argument("--summary", default=None, help="aggregate CSV path")
    p.add_argument(
        "--normalization",
        default="per_n",
        choices=["per_n", "subcritical_crit", "subcritical_betti"],
    )
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=_cmd_regime)

    p = sub.add_parser("coverage", help="check that the balls cover the manifold")
    p.add_argument("--cloud", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--eps-net", type=float, default=None, help="net pitch, default r/4")
    p.set_defaults(func=_cmd_coverage)

    p = sub.add_parser("recover", help="homology recovery rate under a coverage rule")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_recover)

    for sp in sub.choices.values():
        sp.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CechMorseError, ValueError, OSError, NotImplementedError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
