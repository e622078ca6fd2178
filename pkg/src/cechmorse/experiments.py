"""Regime-sweep experiment harness.

A regime is fixed by a radius rule tying the ball radius to the sample
size.  With occupancy nr^m -> 0 the cloud is dust (sub-critical), with
nr^m -> lambda the complex develops structure in every dimension
(critical), and with nr^m -> infinity it consolidates onto the manifold
(super-critical); at nr^m >= C log n the union of balls covers the
manifold and its homology stabilizes.  The harness samples replicated
clouds, computes critical point counts, Betti numbers, and Euler
characteristics per replicate, and aggregates them under the
normalization appropriate to the regime.

Betti numbers are computed from the complex up to degree m - 1; the
top degree comes from the Euler characteristic (the alternating sum of
critical point counts), using that the sublevel set is an open subset
of (a neighborhood of) the m-manifold, so no homology lives above m
whenever the radius stays below the reach.  This keeps the
super-critical runs inside memory bounds: the full (m+1)-skeleton at
coverage scale is orders of magnitude larger than the m-skeleton.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np
from scipy import stats

from .cech import build_cech, euler_characteristic_full
from .critical import enumerate_critical_points
from .errors import CechMorseError, ConfigError, DegeneracyWarning
from .homology import betti_numbers
from .sampling import (
    Binomial,
    DensitySpec,
    ManifoldSpec,
    Poisson,
    coverage_net,
    derive_seed,
    sample,
)

CONFIG_SCHEMA = "cechmorse.regime.v1"
RECORDS_FORMAT = "cechmorse.records.v1"

_COMPUTE_FIELDS = ("counts", "betti", "chi_cech", "chi_morse")


@dataclass(frozen=True)
class PowerLaw:
    """r = c * n^(-alpha); sub-critical above alpha = 1/m."""

    c: float
    alpha: float

    def radius(self, n: int, m: int) -> float:
        return self.c * float(n) ** (-self.alpha)

    def label(self, m: int) -> str:
        da = self.alpha - 1.0 / m
        if da > 1e-12:
            return "sub-critical"
        if da < -1e-12:
            return "super-critical"
        return "critical"

    def to_dict(self) -> dict:
        return {"rule": "powerlaw", "c": self.c, "alpha": self.alpha}


@dataclass(frozen=True)
class Lambda:
    """r = (lambda / n)^(1/m), holding the occupancy nr^m fixed."""

    lam: float

    def radius(self, n: int, m: int) -> float:
        return (self.lam / float(n)) ** (1.0 / m)

    def label(self, m: int) -> str:
        return "critical"

    def to_dict(self) -> dict:
        return {"rule": "lambda", "lambda": self.lam}


@dataclass(frozen=True)
class Coverage:
    """r = (C log n / n)^(1/m); covers the manifold for large C."""

    C: float

    def radius(self, n: int, m: int) -> float:
        return (self.C * np.log(float(n)) / float(n)) ** (1.0 / m)

    def label(self, m: int) -> str:
        return "super-critical"

    def to_dict(self) -> dict:
        return {"rule": "coverage", "C": self.C}


@dataclass(frozen=True)
class RegimeConfig:
    """Full description of one experiment sweep."""

    manifold: ManifoldSpec
    density: DensitySpec
    n_values: tuple[int, ...]
    radius_rule: PowerLaw | Lambda | Coverage
    replicates: int
    base_seed: int = 0
    max_index: int | None = None
    poisson: bool = False
    compute: tuple[str, ...] = ("counts", "betti", "chi_morse")

    def __post_init__(self):
        if self.replicates < 0:
            raise ConfigError("replicates must be nonnegative")
        if any(n < 1 for n in self.n_values):
            raise ConfigError("sample sizes must be positive")
        unknown = set(self.compute) - set(_COMPUTE_FIELDS)
        if unknown:
            raise ConfigError(f"unknown compute fields {sorted(unknown)}")

    @property
    def regime(self) -> str:
        return self.radius_rule.label(self.manifold.m)

    def to_dict(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "manifold": self.manifold.to_dict(),
            "density": self.density.name,
            "n_values": list(self.n_values),
            "radius_rule": self.radius_rule.to_dict(),
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "max_index": self.max_index,
            "poisson": self.poisson,
            "compute": list(self.compute),
        }


def config_hash(config: RegimeConfig) -> str:
    """Short stable digest of the canonical config encoding."""
    canon = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ExperimentRecord:
    """One replicate's measurements; None marks skipped or failed fields."""

    n: int
    r: float
    seed: int
    regime: str
    m: int
    counts: tuple[int, ...] | None
    betti: tuple[int, ...] | None
    chi_cech: int | None
    chi_morse: int | None
    coverage_flag: bool | None
    # timing is reported but not part of the determinism contract
    wall_time: float = field(compare=False, default=0.0)
    error: str | None = None

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "r": self.r,
            "seed": self.seed,
            "regime": self.regime,
            "m": self.m,
            "counts": None if self.counts is None else list(self.counts),
            "betti": None if self.betti is None else list(self.betti),
            "chi_cech": self.chi_cech,
            "chi_morse": self.chi_morse,
            "coverage_flag": self.coverage_flag,
            "wall_time": self.wall_time,
        }
        if self.error is not None:
            out["error"] = self.error
        return out

    @staticmethod
    def from_dict(data: dict) -> "ExperimentRecord":
        return ExperimentRecord(
            n=data["n"],
            r=data["r"],
            seed=data["seed"],
            regime=data["regime"],
            m=data["m"],
            counts=None if data["counts"] is None else tuple(data["counts"]),
            betti=None if data["betti"] is None else tuple(data["betti"]),
            chi_cech=data["chi_cech"],
            chi_morse=data["chi_morse"],
            coverage_flag=data["coverage_flag"],
            wall_time=data["wall_time"],
            error=data.get("error"),
        )


def _run_one(config: RegimeConfig, n: int, r: float, seed: int) -> ExperimentRecord:
    spec = config.manifold
    m = spec.m
    d = spec.ambient_dim
    max_index = config.max_index if config.max_index is not None else m
    regime = config.regime
    t0 = time.perf_counter()
    counts = betti = chi_cech = chi_morse = cover = None
    error = None
    try:
        mode = Poisson(n) if config.poisson else Binomial(n)
        cloud = sample(spec, density=config.density, mode=mode, seed=seed)
        need_chi = "chi_morse" in config.compute or "betti" in config.compute
        if "counts" in config.compute or need_chi:
            # one enumeration serves both the reported counts and chi
            depth = d if need_chi else min(max_index, d)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegeneracyWarning)
                cps = enumerate_critical_points(cloud, r, max_index=depth)
            full = np.zeros(depth + 1, dtype=np.int64)
            for cp in cps:
                full[cp.k] += 1
            if "counts" in config.compute:
                counts = tuple(int(c) for c in full[: min(max_index, d) + 1])
            if need_chi:
                chi = int(sum((-1) ** k * c for k, c in enumerate(full)))
                if "chi_morse" in config.compute:
                    chi_morse = chi
        if "betti" in config.compute:
            cx = build_cech(cloud, r, max_dim=min(m, max(cloud.size - 1, 0)))
            low = betti_numbers(cx, min(m - 1, cloud.size - 1))
            low = tuple(low) + (0,) * (m - len(low))
            top = (-1) ** m * (chi - sum((-1) ** k * b for k, b in enumerate(low)))
            betti = low + (int(top),)
        if "chi_cech" in config.compute:
            chi_cech = int(euler_characteristic_full(cloud, r))
        if isinstance(config.radius_rule, Coverage):
            cover = bool(coverage_probe(cloud, r, eps_net=r / 4.0))
    except Exception as exc:  # noqa: BLE001 - per-record fault isolation
        error = f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - t0
    rec = ExperimentRecord(
        n=n, r=r, seed=seed, regime=regime, m=m, counts=counts, betti=betti,
        chi_cech=chi_cech, chi_morse=chi_morse, coverage_flag=cover,
        wall_time=wall, error=error,
    )
    if rec.chi_cech is not None and rec.chi_morse is not None:
        if rec.chi_cech != rec.chi_morse:
            raise CechMorseError(
                f"Euler characteristic mismatch at n={n} seed={seed}: "
                f"complex gives {rec.chi_cech}, critical points give {rec.chi_morse}"
            )
    return rec


def _run_task(args) -> ExperimentRecord:
    return _run_one(*args)


def run_regime(config: RegimeConfig, jobs: int = 1) -> list[ExperimentRecord]:
    """All replicates of a sweep, ordered by (n position, replicate).

    Record seeds derive deterministically from the base seed, so any
    rerun of the same config reproduces every record bit for bit.  A
    failing replicate yields a record with its ``error`` field set; a
    disagreement between the two Euler characteristics aborts the whole
    run instead, since it signals an internal inconsistency.
    """
    m = config.manifold.m
    tasks = []
    for i, n in enumerate(config.n_values):
        r = float(config.radius_rule.radius(n, m))
        period = config.manifold.period
        if period is not None and r >= period / 4.0:
            raise ConfigError(
                f"rule gives r={r:.4g} at n={n}, at or above a quarter period"
            )
        for rep in range(config.replicates):
            tasks.append((config, n, r, derive_seed(config.base_seed, i, rep)))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_one(*t) for t in tasks]


def _normalized(rec: ExperimentRecord, normalization: str, k: int) -> float:
    if normalization == "per_n":
        if rec.counts is None or k >= len(rec.counts):
            raise ConfigError(f"record lacks N_{k}")
        return rec.counts[k] / rec.n
    if normalization == "subcritical_crit":
        if rec.counts is None or k >= len(rec.counts):
            raise ConfigError(f"record lacks N_{k}")
        return rec.counts[k] / (rec.n ** (k + 1) * rec.r ** (rec.m * k))
    if normalization == "subcritical_betti":
        if rec.betti is None or k >= len(rec.betti):
            raise ConfigError(f"record lacks beta_{k}")
        return rec.betti[k] / (rec.n ** (k + 2) * rec.r ** (rec.m * (k + 1)))
    raise ConfigError(f"unknown normalization {normalization!r}")


def aggregate(
    records: list[ExperimentRecord], normalization: str, k: int
) -> list[dict]:
    """Per-n summary of a normalized statistic across replicates.

    ``per_n`` divides N_k by n (the critical-regime scaling, where the
    mean converges to gamma_k); ``subcritical_crit`` divides N_k by
    n^(k+1) r^(mk) and ``subcritical_betti`` divides beta_k by
    n^(k+2) r^(m(k+1)), the dust-regime scalings, and both therefore
    refuse records from any other regime.  Rows report the mean and
    sample variance with standard errors, the variance/mean ratio, and
    moment-based normality diagnostics.
    """
    good = [r for r in records if r.error is None]
    if not good:
        raise ConfigError("no successful records to aggregate")
    regimes = {r.regime for r in good}
    if len(regimes) > 1:
        raise ConfigError(f"mixed regimes {sorted(regimes)} cannot be aggregated")
    regime = regimes.pop()
    if normalization.startswith("subcritical") and regime != "sub-critical":
        raise ConfigError(
            f"{normalization} normalization needs sub-critical records, got {regime}"
        )
    rows = []
    for n in sorted({r.n for r in good}):
        batch = [r for r in good if r.n == n]
        vals = np.array([_normalized(r, normalization, k) for r in batch])
        count = len(vals)
        mean = float(vals.mean())
        var = float(vals.var(ddof=1)) if count > 1 else 0.0
        se_mean = float(np.sqrt(var / count)) if count > 1 else np.nan
        se_var = var * np.sqrt(2.0 / (count - 1)) if count > 2 else np.nan
        ratio = var / mean if mean != 0 else np.nan
        rows.append(
            {
                "n": n,
                "r": batch[0].r,
                "regime": regime,
                "normalization": normalization,
                "k": k,
                "records": count,
                "mean": mean,
                "variance": var,
                "var_mean_ratio": ratio,
                "se_mean": se_mean,
                "se_variance": se_var,
                "skewness": float(stats.skew(vals)) if count > 2 and var > 0 else np.nan,
                "ex_kurtosis": (
                    float(stats.kurtosis(vals)) if count > 3 and var > 0 else np.nan
                ),
            }
        )
    return rows


def coverage_probe(cloud, r: float, eps_net: float) -> bool:
    """Sufficient coverage check against a fixed net on the manifold.

    If every point of an eps_net-dense net lies within r - eps_net of
    the cloud, the triangle inequality puts every manifold point within
    r, so the balls cover.  Conservative near the threshold.
    """
    if not 0 < eps_net < r:
        raise ValueError("need 0 < eps_net < r")
    net = coverage_net(cloud.spec, eps_net)
    period = cloud.spec.period
    pts = cloud.points
    bound2 = (r - eps_net) ** 2
    for lo in range(0, len(net), 512):
        diff = net[lo : lo + 512, None, :] - pts[None, :, :]
        if period is not None:
            diff -= period * np.round(diff / period)
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        if (d2.min(axis=1) > bound2).any():
            return False
    return True


def expected_betti(spec: ManifoldSpec) -> tuple[int, ...]:
    """Reference Betti numbers for the supported manifolds."""
    if spec.kind == "flat_torus":
        return tuple(comb(spec.m, k) for k in range(spec.m + 1))
    if spec.kind == "circle":
        return (1, 1)
    if spec.kind == "sphere":
        return (1, 0, 1)
    if spec.kind == "embedded_torus":
        return (1, 2, 1)
    raise ConfigError(f"no reference Betti numbers for {spec.kind!r}")


def recovery_experiment(config: RegimeConfig, jobs: int = 1) -> dict:
    """Homology recovery sweep under a coverage radius rule.

    Each replicate succeeds when its computed Betti vector equals the
    manifold's reference vector.  Returns the per-replicate table and
    the overall success rate.
    """
    if not isinstance(config.radius_rule, Coverage):
        raise ConfigError("recovery experiments require the coverage radius rule")
    expected = expected_betti(config.manifold)
    cfg = replace(config, compute=("betti", "chi_morse"))
    records = run_regime(cfg, jobs=jobs)
    rows = []
    successes = 0
    for rec in records:
        ok = rec.error is None and rec.betti == expected
        successes += ok
        rows.append(
            {
                "n": rec.n,
                "r": rec.r,
                "seed": rec.seed,
                "betti": rec.betti,
                "coverage_flag": rec.coverage_flag,
                "success": ok,
                "error": rec.error,
            }
        )
    return {
        "expected": expected,
        "replicates": rows,
        "success_rate": successes / len(rows) if rows else float("nan"),
    }


def records_to_jsonl(records: list[ExperimentRecord], path, header: dict | None = None):
    with open(path, "w") as fh:
        meta = {"format": RECORDS_FORMAT}
        if header:
            meta.update(header)
        fh.write(json.dumps(meta) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def records_from_jsonl(path) -> tuple[dict, list[ExperimentRecord]]:
    with open(path) as fh:
        meta = json.loads(fh.readline())
        records = [ExperimentRecord.from_dict(json.loads(line)) for line in fh]
    return meta, records


def summary_to_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("nothing to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _parse_rule(fields: dict) -> PowerLaw | Lambda | Coverage:
    rule = fields.pop("rule")
    if rule == "powerlaw":
        return PowerLaw(c=float(fields.pop("c")), alpha=float(fields.pop("alpha")))
    if rule == "lambda":
        return Lambda(lam=float(fields.pop("lambda")))
    if rule == "coverage":
        return Coverage(C=float(fields.pop("C")))
    raise ConfigError(f"unknown radius rule {rule!r}")


def _parse_manifold(fields: dict) -> ManifoldSpec:
    kind = fields.pop("manifold")
    data = {"kind": kind}
    for key in ("m", "side", "radius", "major", "minor"):
        if key in fields:
            val = fields.pop(key)
            data[key] = int(val) if key == "m" else float(val)
    return ManifoldSpec.from_dict(data)


def parse_config(text: str) -> RegimeConfig:
    """Parse the key = value config format (# starts a comment).

    The first entry must be ``schema = cechmorse.regime.v1``.  Keys:
    manifold (flat_torus | circle | sphere | embedded_torus) with its
    parameters (m, side, radius, major, minor), rule (powerlaw | lambda
    | coverage) with its parameters (c, alpha | lambda | C), n_values
    (comma separated), replicates, base_seed, max_index, poisson,
    compute (comma separated subset of counts, betti, chi_cech,
    chi_morse).
    """
    fields: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}")
        key, val = line.split("=", 1)
        fields[key.strip()] = val.strip()
    if fields.pop("schema", None) != CONFIG_SCHEMA:
        raise ConfigError(f"config must declare schema = {CONFIG_SCHEMA}")
    try:
        manifold = _parse_manifold(fields)
        rule = _parse_rule(fields)
        n_values = tuple(int(x) for x in fields.pop("n_values").split(",") if x)
        replicates = int(fields.pop("replicates"))
    except KeyError as missing:
        raise ConfigError(f"config is missing {missing}") from None
    base_seed = int(fields.pop("base_seed", "0"))
    max_index = fields.pop("max_index", None)
    poisson = fields.pop("poisson", "false").lower() in ("1", "true", "yes")
    compute = tuple(
        x.strip()
        for x in fields.pop("compute", "counts,betti,chi_morse").split(",")
        if x.strip()
    )
    if fields:
        raise ConfigError(f"unknown config keys {sorted(fields)}")
    return RegimeConfig(
        manifold=manifold,
        density=DensitySpec.uniform(manifold),
        n_values=n_values,
        radius_rule=rule,
        replicates=replicates,
        base_seed=base_seed,
        max_index=None if max_index is None else int(max_index),
        poisson=poisson,
        compute=compute,
    )


def load_config(path) -> RegimeConfig:
    with open(path) as fh:
        return parse_config(fh.read())
