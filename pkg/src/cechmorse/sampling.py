"""Random point clouds on supported manifolds.

Supported manifolds: the flat torus (a periodic unit box in dimension
m), the circle in the plane, the round 2-sphere, and the embedded torus
of revolution in R^3.  Sampling draws either a fixed number of points
(binomial mode) or a Poisson-distributed number (poisson mode), from
the uniform distribution or from a custom density given with explicit
sup/inf bounds for rejection sampling and coverage analysis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import RejectionStallError, UnsupportedError

_STALL_RATE = 1e-4
_STALL_MIN_PROPOSALS = 50_000


@dataclass(frozen=True)
class ManifoldSpec:
    """A supported manifold with its geometric parameters.

    Use the module factories (``flat_torus``, ``circle``, ``sphere2``,
    ``embedded_torus``) instead of constructing directly.
    """

    kind: str
    m: int
    ambient_dim: int
    side: float | None = None
    radius: float | None = None
    major: float | None = None
    minor: float | None = None

    @property
    def volume(self) -> float:
        """Riemannian volume (length / area / m-volume)."""
        if self.kind == "flat_torus":
            return self.side**self.m
        if self.kind == "circle":
            return 2.0 * np.pi * self.radius
        if self.kind == "sphere":
            return 4.0 * np.pi * self.radius**2
        if self.kind == "embedded_torus":
            return 4.0 * np.pi**2 * self.major * self.minor
        raise UnsupportedError(self.kind)

    @property
    def period(self) -> float | None:
        """Box period for the periodic metric, None for embedded manifolds."""
        return self.side if self.kind == "flat_torus" else None

    @property
    def reach(self) -> float:
        """Largest radius at which ambient offsets deformation-retract back."""
        if self.kind == "flat_torus":
            return np.inf
        if self.kind in ("circle", "sphere"):
            return self.radius
        if self.kind == "embedded_torus":
            return min(self.minor, self.major - self.minor)
        raise UnsupportedError(self.kind)

    def sample_uniform(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind == "flat_torus":
            return rng.uniform(0.0, self.side, size=(count, self.m))
        if self.kind == "circle":
            phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
            return self.radius * np.column_stack([np.cos(phi), np.sin(phi)])
        if self.kind == "sphere":
            g = rng.standard_normal((count, 3))
            return self.radius * g / np.linalg.norm(g, axis=1, keepdims=True)
        if self.kind == "embedded_torus":
            return self._sample_torus_uniform(rng, count)
        raise UnsupportedError(self.kind)

    def _sample_torus_uniform(self, rng: np.random.Generator, count: int) -> np.ndarray:
        # area element r_minor (R + r_minor cos t) dt dphi: reject on t
        out = np.empty((count, 3))
        got = 0
        while got < count:
            chunk = max(1024, count - got)
            t = rng.uniform(0.0, 2.0 * np.pi, size=chunk)
            u = rng.uniform(0.0, 1.0, size=chunk)
            keep = u <= (self.major + self.minor * np.cos(t)) / (self.major + self.minor)
            t = t[keep][: count - got]
            phi = rng.uniform(0.0, 2.0 * np.pi, size=t.size)
            ring = self.major + self.minor * np.cos(t)
            out[got : got + t.size] = np.column_stack(
                [ring * np.cos(phi), ring * np.sin(phi), self.minor * np.sin(t)]
            )
            got += t.size
        return out

    def constraint_residual(self, points: np.ndarray) -> np.ndarray:
        """Per-point distance from the defining constraint, zero on-manifold."""
        p = np.asarray(points, dtype=np.float64)
        if self.kind == "flat_torus":
            below = np.clip(-p, 0.0, None)
            above = np.clip(p - self.side, 0.0, None)
            return np.maximum(below, above).max(axis=1)
        if self.kind in ("circle", "sphere"):
            return np.abs(np.linalg.norm(p, axis=1) - self.radius)
        if self.kind == "embedded_torus":
            ring = np.hypot(p[:, 0], p[:, 1]) - self.major
            return np.abs(np.hypot(ring, p[:, 2]) - self.minor)
        raise UnsupportedError(self.kind)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "m": self.m}
        for key in ("side", "radius", "major", "minor"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out

    @staticmethod
    def from_dict(data: dict) -> "ManifoldSpec":
        kind = data["kind"]
        if kind == "flat_torus":
            return flat_torus(data["m"], data.get("side", 1.0))
        if kind == "circle":
            return circle(data.get("radius", 1.0))
        if kind == "sphere":
            return sphere2(data.get("radius", 1.0))
        if kind == "embedded_torus":
            return embedded_torus(data.get("major", 2.0), data.get("minor", 1.0))
        raise UnsupportedError(kind)


def flat_torus(m: int, side: float = 1.0) -> ManifoldSpec:
    """Periodic box [0, side)^m with the flat quotient metric."""
    if m < 1:
        raise ValueError("dimension must be at least 1")
    if side <= 0:
        raise ValueError("side must be positive")
    return ManifoldSpec(kind="flat_torus", m=m, ambient_dim=m, side=float(side))


def circle(radius: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec(kind="circle", m=1, ambient_dim=2, radius=float(radius))


def sphere2(radius: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec(kind="sphere", m=2, ambient_dim=3, radius=float(radius))


def embedded_torus(major: float = 2.0, minor: float = 1.0) -> ManifoldSpec:
    """Torus of revolution in R^3; requires 0 < minor < major."""
    if not 0 < minor < major:
        raise ValueError("need 0 < minor < major")
    return ManifoldSpec(
        kind="embedded_torus", m=2, ambient_dim=3, major=float(major), minor=float(minor)
    )


@dataclass(frozen=True)
class DensitySpec:
    """Probability density on a manifold with explicit bounds.

    ``f`` evaluates the density at ambient points; ``None`` means the
    uniform density.  ``f_max`` bounds rejection sampling, ``f_min``
    feeds the coverage radius rule.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray] | None
    f_max: float
    f_min: float

    @staticmethod
    def uniform(spec: ManifoldSpec) -> "DensitySpec":
        level = 1.0 / spec.volume
        return DensitySpec(name="uniform", f=None, f_max=level, f_min=level)

    @staticmethod
    def custom(
        name: str,
        f: Callable[[np.ndarray], np.ndarray],
        f_max: float,
        f_min: float,
    ) -> "DensitySpec":
        if not 0 <= f_min <= f_max:
            raise ValueError("need 0 <= f_min <= f_max")
        return DensitySpec(name=name, f=f, f_max=float(f_max), f_min=float(f_min))


@dataclass(frozen=True)
class Binomial:
    """Fixed sample size."""

    n: int


@dataclass(frozen=True)
class Poisson:
    """Poisson-distributed sample size with the given expectation."""

    n: float


@dataclass
class PointCloud:
    """A sampled point cloud together with its generating description."""

    points: np.ndarray
    spec: ManifoldSpec
    density: DensitySpec
    mode: str
    n_param: float
    seed: int

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def period(self) -> float | None:
        return self.spec.period

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def to_dict(self) -> dict:
        return {
            "format": "cechmorse.cloud.v1",
            "spec": self.spec.to_dict(),
            "density": {
                "name": self.density.name,
                "f_max": self.density.f_max,
                "f_min": self.density.f_min,
            },
            "mode": self.mode,
            "n": self.n_param,
            "seed": self.seed,
            "points": self.points.tolist(),
        }

    @staticmethod
    def from_dict(data: dict) -> "PointCloud":
        spec = ManifoldSpec.from_dict(data["spec"])
        dens = data.get("density", {})
        if dens.get("name", "uniform") == "uniform":
            density = DensitySpec.uniform(spec)
        else:
            # evaluator is not serialized; bounds and name survive the round trip
            density = DensitySpec(
                name=dens["name"], f=None, f_max=dens["f_max"], f_min=dens["f_min"]
            )
        return PointCloud(
            points=np.asarray(data["points"], dtype=np.float64),
            spec=spec,
            density=density,
            mode=data["mode"],
            n_param=data["n"],
            seed=data["seed"],
        )

    def save(self, path, extra: dict | None = None) -> None:
        data = self.to_dict()
        if extra:
            data.update(extra)
        with open(path, "w") as fh:
            json.dump(data, fh)

    @staticmethod
    def load(path) -> "PointCloud":
        with open(path) as fh:
            return PointCloud.from_dict(json.load(fh))


def derive_seed(base_seed: int, *keys: int) -> int:
    """Deterministic child seed for replicate streams."""
    state = np.random.SeedSequence([int(base_seed), *map(int, keys)]).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def sample(
    spec: ManifoldSpec,
    density: DensitySpec | None = None,
    mode: Binomial | Poisson | None = None,
    seed: int = 0,
) -> PointCloud:
    """Draw a point cloud from ``density`` on ``spec``.

    Binomial mode draws exactly ``mode.n`` points; poisson mode first
    draws the count from a Poisson distribution with mean ``mode.n``.
    Custom densities are realized by rejection against the uniform
    measure using the declared ``f_max`` bound.

    Raises
    ------
    RejectionStallError
        If the rejection acceptance rate falls below 1e-4, which
        indicates a wildly loose ``f_max`` or an unnormalized density.
    """
    if density is None:
        density = DensitySpec.uniform(spec)
    if mode is None:
        raise ValueError("mode is required: Binomial(n) or Poisson(n)")
    rng = np.random.default_rng(seed)
    if isinstance(mode, Poisson):
        count = int(rng.poisson(mode.n))
        mode_name = "poisson"
    elif isinstance(mode, Binomial):
        count = int(mode.n)
        mode_name = "binomial"
    else:
        raise TypeError(f"unsupported mode {mode!r}")
    if count == 0:
        points = np.empty((0, spec.ambient_dim))
    elif density.f is None:
        points = spec.sample_uniform(rng, count)
    else:
        points = _rejection_sample(spec, density, rng, count)
    return PointCloud(
        points=points,
        spec=spec,
        density=density,
        mode=mode_name,
        n_param=mode.n,
        seed=int(seed),
    )


def _rejection_sample(
    spec: ManifoldSpec, density: DensitySpec, rng: np.random.Generator, count: int
) -> np.ndarray:
    # accept x uniform with probability f(x) / f_max
    bound = density.f_max
    out = np.empty((count, spec.ambient_dim))
    got = 0
    proposed = 0
    while got < count:
        chunk = max(2048, count - got)
        x = spec.sample_uniform(rng, chunk)
        u = rng.uniform(0.0, bound, size=chunk)
        vals = np.asarray(density.f(x), dtype=np.float64)
        if np.any(vals > bound * (1 + 1e-12)):
            raise ValueError("density exceeds its declared f_max")
        keep = x[u <= vals][: count - got]
        out[got : got + keep.shape[0]] = keep
        got += keep.shape[0]
        proposed += chunk
        if proposed >= _STALL_MIN_PROPOSALS and got < _STALL_RATE * proposed:
            raise RejectionStallError(
                f"acceptance rate {got / proposed:.2e} below {_STALL_RATE:.0e}"
            )
    return out


def coverage_net(spec: ManifoldSpec, eps: float) -> np.ndarray:
    """Deterministic point set within distance ``eps`` of every manifold point.

    Net sizes are implementation-defined; construction guarantees the
    covering radius analytically for the box, circle and torus grids,
    and by a spiral with a validated density margin on the sphere.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if spec.kind == "flat_torus":
        # lattice pitch h has covering radius h sqrt(m) / 2 under wrapping
        per_axis = int(np.ceil(spec.side * np.sqrt(spec.m) / (2.0 * eps)))
        per_axis = max(per_axis, 1)
        axes = [np.arange(per_axis) * (spec.side / per_axis)] * spec.m
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)
    if spec.kind == "circle":
        n = max(int(np.ceil(np.pi * spec.radius / eps)), 3)
        phi = 2.0 * np.pi * np.arange(n) / n
        return spec.radius * np.column_stack([np.cos(phi), np.sin(phi)])
    if spec.kind == "sphere":
        # Fibonacci spiral; empirical covering radius is ~2.4 R / sqrt(n),
        # so this density leaves a comfortable margin at radius eps
        n = max(int(np.ceil(16.0 * (spec.radius / eps) ** 2)), 12)
        i = np.arange(n)
        z = 1.0 - (2.0 * i + 1.0) / n
        phi = np.pi * (1.0 + np.sqrt(5.0)) * i
        s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        return spec.radius * np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    if spec.kind == "embedded_torus":
        # product grid in the two angles; each factor covers to eps/sqrt(2)
        n_t = max(int(np.ceil(np.sqrt(2.0) * np.pi * spec.minor / eps)), 3)
        n_p = max(int(np.ceil(np.sqrt(2.0) * np.pi * (spec.major + spec.minor) / eps)), 3)
        t = 2.0 * np.pi * np.arange(n_t) / n_t
        p = 2.0 * np.pi * np.arange(n_p) / n_p
        tt, pp = np.meshgrid(t, p, indexing="ij")
        ring = spec.major + spec.minor * np.cos(tt)
        return np.column_stack(
            [
                (ring * np.cos(pp)).ravel(),
                (ring * np.sin(pp)).ravel(),
                (spec.minor * np.sin(tt)).ravel(),
            ]
        )
    raise UnsupportedError(spec.kind)
