"""Radially symmetric densities on R^2 and their grid representations.

The central object is the piecewise-constant-in-radius profile: a list of
strictly increasing breakpoints with one density value per annulus, an
optional positivity floor outside the last breakpoint, and an optional
cubic-smoothstep ramp replacing each jump.  The engineered ring/spike
density that drives the entropy-production experiments is built here, as
well as the Gaussian used as the universal equilibrium oracle in tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

R_OUTER = 5.0
R_RING = math.sqrt(5.0)


def _require(cond: bool, invariant: str) -> None:
    if not cond:
        raise ConfigError(f"invariant violated: {invariant}")


@dataclass(frozen=True)
class Velocity:
    """A point in 2D velocity space with finite components."""

    x: float
    y: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.x) and math.isfinite(self.y),
                 "velocity components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def as_point(v) -> np.ndarray:
    """Coerce a Velocity / pair / array into a finite (2,) float array."""
    if isinstance(v, Velocity):
        return v.as_array()
    p = np.asarray(v, dtype=float)
    _require(p.shape == (2,), "velocity must have exactly two components")
    _require(bool(np.all(np.isfinite(p))), "velocity components must be finite")
    return p


@dataclass(frozen=True)
class CounterexampleParams:
    """Parameters of the ring/spike density.

    a:           amplitude of the ring at radius sqrt(5)
    rho:         feature half-width (origin ball radius, ring half-width)
    c:           coefficient of the origin ball, whose value is c * a^2
    floor_delta: positivity floor applied where the density would vanish
    r_outer:     support radius (fixed 5)
    r_ring:      ring radius (fixed sqrt(5))
    r_domain:    computational truncation radius
    """

    a: float
    rho: float = 0.1
    c: float = 1.0
    floor_delta: float = 1e-6
    r_outer: float = R_OUTER
    r_ring: float = R_RING
    r_domain: float = 8.0

    def __post_init__(self) -> None:
        _require(self.a > 0, "a > 0")
        _require(0 < self.rho <= 0.2, "rho in (0, 0.2]")
        _require(self.c > 0, "c > 0")
        _require(self.floor_delta >= 0, "floor_delta >= 0")
        _require(self.floor_delta < 1, "floor_delta < 1")
        _require(self.rho < self.r_ring - self.rho,
                 "rho < r_ring - rho (ring does not touch origin ball)")
        _require(self.rho < self.r_outer - self.r_ring,
                 "rho < r_outer - r_ring (ring strictly inside support)")
        _require(self.r_domain >= self.r_outer + 2.0,
                 "r_domain >= r_outer + 2 (one collision reach of margin)")


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """Monotone C^1 cubic ramp from 0 at x=0 to 1 at x=1."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


@dataclass(frozen=True)
class RadialStepProfile:
    """Piecewise-constant-in-radius density, optionally with smoothed jumps.

    ``values[i]`` is the density on the annulus (breakpoints[i-1],
    breakpoints[i]] (first annulus includes 0); a point exactly on a
    breakpoint takes the inner annulus value.  Beyond the last breakpoint
    the density equals ``floor_delta``.  With ``smoothing_width`` s > 0
    each jump becomes a cubic smoothstep ramp of radial half-width s.
    Instances are immutable; evaluation is a pure function of |v|.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    smoothing_width: float = 0.0
    floor_delta: float = 0.0
    params: Optional[CounterexampleParams] = None

    radial = True

    def __post_init__(self) -> None:
        b = np.asarray(self.breakpoints, dtype=float)
        u = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", u)
        _require(b.ndim == 1 and b.size >= 1, "at least one breakpoint")
        _require(bool(np.all(np.diff(b) > 0)) and b[0] > 0,
                 "breakpoints strictly increasing and positive")
        _require(u.shape == b.shape, "one value per annulus")
        _require(bool(np.all(np.isfinite(u))) and bool(np.all(u >= 0)),
                 "values finite and >= 0")
        _require(self.floor_delta >= 0, "floor_delta >= 0")
        s = self.smoothing_width
        _require(s >= 0, "smoothing_width >= 0")
        if s > 0:
            gaps = np.diff(np.concatenate(([0.0], b)))
            _require(bool(np.all(gaps > 2 * s)),
                     "smoothing_width < half the narrowest annulus")

    @property
    def r_domain(self) -> float:
        return float(self.breakpoints[-1])

    def eval_radii(self, r) -> np.ndarray:
        """Density at radii ``r`` (any array shape)."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        ext = np.concatenate((self.values, [self.floor_delta]))
        idx = np.searchsorted(self.breakpoints, r, side="left")
        out = ext[idx]
        s = self.smoothing_width
        if s > 0:
            b = self.breakpoints
            # Nearest breakpoint below/above; at most one ramp can apply.
            j = np.clip(np.searchsorted(b, r, side="left"), 0, b.size - 1)
            jm = np.clip(j - 1, 0, b.size - 1)
            for cand in (j, jm):
                inside = np.abs(r - b[cand]) <= s
                if np.any(inside):
                    k = cand[inside]
                    x = (r[inside] - (b[k] - s)) / (2.0 * s)
                    out[inside] = ext[k] + (ext[k + 1] - ext[k]) * _smoothstep(x)
        return out[0] if scalar else out

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.eval_radii(np.hypot(pts[..., 0], pts[..., 1]))

    def smoothed(self, smoothing_width: float) -> "RadialStepProfile":
        return replace(self, smoothing_width=smoothing_width)

    def mass(self) -> float:
        """Exact integral of the density over the disk of radius r_domain."""
        b = np.concatenate(([0.0], self.breakpoints))
        m = float(np.sum(self.values * np.pi * np.diff(b**2)))
        s = self.smoothing_width
        if s > 0:
            ext = np.concatenate((self.values, [self.floor_delta]))
            jumps = np.diff(ext)
            # Interior ramps: exact smoothstep integral against 2*pi*r dr.
            m += float(np.sum(jumps[:-1])) * (-np.pi * s * s / 5.0)
            # Last ramp is truncated at r_domain (half of it lies inside).
            bl, dl = self.breakpoints[-1], jumps[-1]
            m += 4.0 * np.pi * s * dl * (3.0 * bl / 32.0 - s / 40.0)
        return m

    def to_json(self) -> dict:
        d = {
            "breakpoints": self.breakpoints.tolist(),
            "values": self.values.tolist(),
            "smoothing_width": self.smoothing_width,
            "floor_delta": self.floor_delta,
        }
        if self.params is not None:
            p = self.params
            d["params"] = {"a": p.a, "rho": p.rho, "c": p.c,
                           "floor_delta": p.floor_delta, "r_domain": p.r_domain}
        return d


def build_counterexample(params: CounterexampleParams,
                         smoothing_width: float = 0.0) -> RadialStepProfile:
    """Assemble the ring/spike density.

    c*a^2 on the origin ball of radius rho, a on the ring of half-width rho
    at radius sqrt(5), 1 on the rest of the disk of radius 5, and the
    positivity floor on [5, r_domain].
    """
    p = params
    breaks = [p.rho, p.r_ring - p.rho, p.r_ring + p.rho, p.r_outer, p.r_domain]
    vals = [p.c * p.a**2, 1.0, p.a, 1.0, max(0.0, p.floor_delta)]
    return RadialStepProfile(
        breakpoints=np.array(breaks),
        values=np.array(vals),
        smoothing_width=smoothing_width,
        floor_delta=max(0.0, p.floor_delta),
        params=p,
    )


def counterexample_to_json(profile: RadialStepProfile) -> dict:
    _require(profile.params is not None, "profile carries no parameter set")
    p = profile.params
    return {"a": p.a, "rho": p.rho, "c": p.c, "floor_delta": p.floor_delta,
            "r_domain": p.r_domain, "smoothing_width": profile.smoothing_width}


def counterexample_from_json(obj) -> RadialStepProfile:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        params = CounterexampleParams(
            a=float(obj["a"]), rho=float(obj.get("rho", 0.1)),
            c=float(obj["c"]), floor_delta=float(obj.get("floor_delta", 1e-6)),
            r_domain=float(obj.get("r_domain", 8.0)))
    except KeyError as e:
        raise ConfigError(f"missing profile key: {e}") from e
    return build_counterexample(params, float(obj.get("smoothing_width", 0.0)))


def eval_profile(profile: RadialStepProfile, v) -> float:
    """Density of ``profile`` at a single velocity."""
    p = as_point(v)
    return float(profile.eval_radii(math.hypot(p[0], p[1])))


@dataclass(frozen=True)
class GaussianDensity:
    """Centered Gaussian exp(-|v|^2 / (2 sigma^2)); equilibrium of every kernel."""

    sigma: float = 1.0
    amplitude: float = 1.0

    radial = True
    floor_delta = 0.0
    params = None

    def eval_radii(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.amplitude * np.exp(-0.5 * (r / self.sigma) ** 2)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.eval_radii(np.hypot(pts[..., 0], pts[..., 1]))


@dataclass(frozen=True)
class GridSpec:
    """Uniform square grid covering [-half_extent, half_extent]^2."""

    half_extent: float
    n_per_axis: int

    def __post_init__(self) -> None:
        _require(self.half_extent > 0, "half_extent > 0")
        _require(self.n_per_axis >= 2, "n_per_axis >= 2")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / (self.n_per_axis - 1)

    def axis(self) -> np.ndarray:
        # Integer numerators keep the axis exactly symmetric about 0.
        n = self.n_per_axis
        return (2 * np.arange(n) - (n - 1)) * (self.half_extent / (n - 1))


@dataclass
class ScalarGridField:
    """Dense scalar field on a GridSpec; values[i, j] sits at (x_i, y_j).

    Calling the field interpolates bilinearly; queries outside the grid
    extent return ``floor_delta``.  A profile may stay attached so that
    operator sweeps can use analytic off-grid values; evolution drops it.
    """

    spec: GridSpec
    values: np.ndarray
    floor_delta: float = 0.0
    profile: Optional[RadialStepProfile] = None
    # Densities are nonnegative; operator output fields carry both signs.
    nonnegative: bool = True

    radial = False

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        n = self.spec.n_per_axis
        _require(v.shape == (n, n), "values shape matches n_per_axis")
        _require(bool(np.all(np.isfinite(v))), "field values finite")
        if self.nonnegative:
            _require(bool(np.all(v >= 0)), "field values >= 0")
        self.values = v

    @property
    def params(self):
        return self.profile.params if self.profile is not None else None

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        h = self.spec.spacing
        half = self.spec.half_extent
        n = self.spec.n_per_axis
        u = (x + half) / h
        w = (y + half) / h
        i = np.clip(np.floor(u).astype(np.int64), 0, n - 2)
        j = np.clip(np.floor(w).astype(np.int64), 0, n - 2)
        fx = u - i
        fy = w - j
        vals = ((1 - fx) * (1 - fy) * self.values[i, j]
                + fx * (1 - fy) * self.values[i + 1, j]
                + (1 - fx) * fy * self.values[i, j + 1]
                + fx * fy * self.values[i + 1, j + 1])
        outside = (np.abs(x) > half) | (np.abs(y) > half)
        if np.any(outside):
            vals = np.where(outside, self.floor_delta, vals)
        return vals

    def detached(self) -> "ScalarGridField":
        """Copy without the analytic profile (pure interpolation)."""
        return ScalarGridField(self.spec, self.values.copy(),
                               floor_delta=self.floor_delta, profile=None)

    def moments(self) -> tuple[float, np.ndarray, float]:
        """(mass, momentum, energy) by the grid quadrature rule h^2 * sum."""
        h2 = self.spec.spacing ** 2
        ax = self.spec.axis()
        m = h2 * float(np.sum(self.values))
        px = h2 * float(np.sum(self.values * ax[:, None]))
        py = h2 * float(np.sum(self.values * ax[None, :]))
        r2 = ax[:, None] ** 2 + ax[None, :] ** 2
        e = h2 * float(np.sum(self.values * r2))
        return m, np.array([px, py]), e

    def to_csv(self, path) -> None:
        ax = self.spec.axis()
        with open(path, "w") as fh:
            fh.write("x,y,value\n")
            for i in range(self.spec.n_per_axis):
                for j in range(self.spec.n_per_axis):
                    fh.write(f"{ax[i]!r},{ax[j]!r},{self.values[i, j]!r}\n")

    def to_binary(self, path) -> None:
        n = self.spec.n_per_axis
        with open(path, "wb") as fh:
            fh.write(np.array([n, n], dtype="<i8").tobytes())
            fh.write(self.values.astype("<f8").tobytes())

    @classmethod
    def from_binary(cls, path, half_extent: float,
                    floor_delta: float = 0.0) -> "ScalarGridField":
        with open(path, "rb") as fh:
            header = np.frombuffer(fh.read(16), dtype="<i8")
            _require(header.shape == (2,) and header[0] == header[1] and header[0] >= 2,
                     "binary field header holds two equal axis sizes")
            n = int(header[0])
            vals = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n)
        return cls(GridSpec(half_extent, n), vals.copy(), floor_delta=floor_delta)


def field_from_function(spec: GridSpec, fn: Callable[[np.ndarray], np.ndarray],
                        floor_delta: float = 0.0) -> ScalarGridField:
    ax = spec.axis()
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1)
    return ScalarGridField(spec, np.asarray(fn(pts), dtype=float),
                           floor_delta=floor_delta)


def profile_to_grid(profile: RadialStepProfile, spec: GridSpec) -> ScalarGridField:
    """Sample a radial profile onto a grid.

    The grid must cover the profile's domain disk.  For the ring/spike
    density the spacing must resolve the thinnest feature: spacing <=
    rho/5 for sharp steps, or <= 2 * smoothing_width for smoothed ones.
    """
    _require(spec.half_extent >= profile.r_domain,
             "half_extent >= r_domain")
    p = profile.params
    if p is not None:
        s = profile.smoothing_width
        limit = p.rho / 5.0 if s == 0 else max(p.rho / 5.0, 2.0 * s)
        if spec.spacing > limit * (1 + 1e-12):
            raise ConfigError(
                f"grid too coarse for the profile: spacing {spec.spacing:.4g} "
                f"> {limit:.4g} (rho/5, or 2*smoothing_width if larger)")
    ax = spec.axis()
    radii = np.hypot(ax[:, None], ax[None, :])
    vals = profile.eval_radii(radii)
    return ScalarGridField(spec, vals, floor_delta=profile.floor_delta,
                           profile=profile)


def grid_interpolate(field: ScalarGridField, v) -> float:
    """Bilinear interpolation at one velocity; floor_delta outside the extent."""
    return float(field(as_point(v)))
