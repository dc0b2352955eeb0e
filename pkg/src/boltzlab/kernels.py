"""Collision kernels and pre/post-collision geometry.

The product kernel B(|v-v*|, cos(theta)) = Phi(|v-v*|) * b(cos(theta))
comes in two forms:

* singular: Phi a Dirac mass at |v-v*| = r0 (default sqrt(2)) and b a
  Dirac mass splitting weight equally between deviation angles +-pi/2.
  With r0 = sqrt(2), each admissible collision puts v, v', v*, v'* on
  the corners of a unit square, and the operator reduces to an integral
  over a circle of such squares.
* mollified: both Dirac factors replaced by compactly supported
  polynomial bumps (1-u^2)^2, normalized so the kernel's total mass in
  (v*, sigma) space equals the singular weight W.

Total-weight convention: integrating B over dsigma dv* around any base
point v gives W.  Equivalently, the circle reduction of the singular
kernel computes W times the *mean* over the unit circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, KernelFormError
from .profiles import Velocity, as_point, _require

SQRT2 = math.sqrt(2.0)
# integral of (1-u^2)^2 over [-1, 1]
_BUMP_MASS = 16.0 / 15.0


@dataclass(frozen=True)
class DiracPerpendicular:
    """Angular Dirac factor: equal masses at deviation angles +-pi/2, total 1."""

    kind = "dirac_perpendicular"


@dataclass(frozen=True)
class AngularBump:
    """Smooth angular factor supported within eps_theta of +-pi/2."""

    eps_theta: float

    kind = "angular_bump"

    def __post_init__(self) -> None:
        _require(0 < self.eps_theta < math.pi / 2, "0 < eps_theta < pi/2")


@dataclass(frozen=True)
class DiracAt:
    """Radial Dirac factor concentrated at relative speed r0."""

    r0: float = SQRT2

    kind = "dirac"

    def __post_init__(self) -> None:
        _require(self.r0 > 0, "r0 > 0")


@dataclass(frozen=True)
class RadialBump:
    """Smooth radial factor supported in [r0 - eps_r, r0 + eps_r]."""

    r0: float = SQRT2
    eps_r: float = 0.05

    kind = "radial_bump"

    def __post_init__(self) -> None:
        _require(self.r0 > 0, "r0 > 0")
        _require(0 < self.eps_r < self.r0, "0 < eps_r < r0")


AngularFactor = Union[DiracPerpendicular, AngularBump]
RadialFactor = Union[DiracAt, RadialBump]


@dataclass(frozen=True)
class KernelSpec:
    """Product collision kernel with an explicit total weight W."""

    angular: AngularFactor = DiracPerpendicular()
    radial: RadialFactor = DiracAt()
    weight: float = 1.0

    def __post_init__(self) -> None:
        _require(self.weight > 0, "weight > 0")

    @property
    def is_singular(self) -> bool:
        return (isinstance(self.angular, DiracPerpendicular)
                and isinstance(self.radial, DiracAt))

    @property
    def has_density(self) -> bool:
        return isinstance(self.angular, AngularBump) and isinstance(self.radial, RadialBump)

    @classmethod
    def square_singular(cls, weight: float = 1.0) -> "KernelSpec":
        return cls(DiracPerpendicular(), DiracAt(SQRT2), weight)

    @classmethod
    def mollified(cls, eps_r: float = 0.05, eps_theta: float = 0.05,
                  r0: float = SQRT2, weight: float = 1.0) -> "KernelSpec":
        return cls(AngularBump(eps_theta), RadialBump(r0, eps_r), weight)

    def to_json(self) -> dict:
        ang: dict = {"kind": self.angular.kind}
        if isinstance(self.angular, AngularBump):
            ang["eps_theta"] = self.angular.eps_theta
        rad: dict = {"kind": self.radial.kind, "r0": self.radial.r0}
        if isinstance(self.radial, RadialBump):
            rad["eps_r"] = self.radial.eps_r
        return {"angular": ang, "radial": rad, "weight": self.weight}

    @classmethod
    def from_json(cls, obj: dict) -> "KernelSpec":
        try:
            ak = obj["angular"]["kind"]
            if ak == "dirac_perpendicular":
                ang: AngularFactor = DiracPerpendicular()
            elif ak == "angular_bump":
                ang = AngularBump(float(obj["angular"]["eps_theta"]))
            else:
                raise ConfigError(f"unknown angular kind: {ak}")
            rk = obj["radial"]["kind"]
            r0 = float(obj["radial"].get("r0", SQRT2))
            if rk == "dirac":
                rad: RadialFactor = DiracAt(r0)
            elif rk == "radial_bump":
                rad = RadialBump(r0, float(obj["radial"]["eps_r"]))
            else:
                raise ConfigError(f"unknown radial kind: {rk}")
            return cls(ang, rad, float(obj.get("weight", 1.0)))
        except KeyError as e:
            raise ConfigError(f"missing kernel key: {e}") from e


@dataclass(frozen=True)
class SquareConfiguration:
    """The four velocities of one singular-kernel collision.

    In the order v, v', v*, v'* the points run around a square of side 1;
    v and v* are opposite corners, so momentum and energy sums match
    exactly between the pre- and post-collision pairs.
    """

    v: Velocity
    v_prime: Velocity
    v_star: Velocity
    v_star_prime: Velocity


def perp(u: np.ndarray) -> np.ndarray:
    """Counterclockwise rotation by pi/2."""
    return np.stack((-u[..., 1], u[..., 0]), axis=-1)


def _check_unit(sigma: np.ndarray) -> None:
    _require(abs(float(np.hypot(sigma[0], sigma[1])) - 1.0) <= 1e-12,
             "|sigma| = 1 within 1e-12")


def post_collision_velocities(v, v_star, sigma):
    """Map (v, v*, sigma) to the outgoing pair (v', v'*).

    v' and v'* sit at midpoint +- (|v - v*|/2) sigma, which conserves
    momentum exactly and energy up to floating-point rounding.
    """
    p, q = as_point(v), as_point(v_star)
    s = as_point(sigma)
    _check_unit(s)
    mid = 0.5 * (p + q)
    half_gap = 0.5 * math.hypot(*(p - q))
    vp = mid + half_gap * s
    vsp = mid - half_gap * s
    return Velocity(*vp), Velocity(*vsp)


def square_configuration(v, sigma) -> SquareConfiguration:
    """Unit square of collision partners: v' = v + sigma, v'* = v + sigma_perp,
    v* = v + sigma + sigma_perp, with sigma_perp the counterclockwise perp."""
    p = as_point(v)
    s = as_point(sigma)
    _check_unit(s)
    sp = perp(s)
    return SquareConfiguration(
        v=Velocity(*p),
        v_prime=Velocity(*(p + s)),
        v_star=Velocity(*(p + s + sp)),
        v_star_prime=Velocity(*(p + sp)),
    )


def _bump(t: np.ndarray, eps: float) -> np.ndarray:
    u = np.clip(np.asarray(t, dtype=float) / eps, -1.0, 1.0)
    inside = np.abs(t) < eps
    return np.where(inside, (1.0 - u * u) ** 2, 0.0)


def angular_density(angular: AngularBump, cos_theta) -> np.ndarray:
    """Normalized b(cos theta): unit total mass over the sigma circle.

    The distance of the deviation angle from +-pi/2 is |arcsin(cos theta)|,
    so a single formula covers both windows.
    """
    c = np.clip(np.asarray(cos_theta, dtype=float), -1.0, 1.0)
    t = np.arcsin(c)
    return _bump(t, angular.eps_theta) / (2.0 * _BUMP_MASS * angular.eps_theta)


def radial_density(radial: RadialBump, r, weight: float = 1.0) -> np.ndarray:
    """Normalized Phi(r): integral of Phi(r) r dr equals weight / (2 pi)."""
    r = np.asarray(r, dtype=float)
    norm = 2.0 * math.pi * _BUMP_MASS * radial.eps_r * radial.r0
    return weight * _bump(r - radial.r0, radial.eps_r) / norm


def kernel_eval(kernel: KernelSpec, r, cos_theta) -> np.ndarray:
    """Pointwise kernel density B(r, cos theta) for mollified kernels.

    Normalization: integrating the result over dsigma dv* (i.e. against
    2 pi r dr over the radial window and dtheta over both angular
    windows, doubled for the two signs of the deviation) gives W.
    """
    if not kernel.has_density:
        raise KernelFormError(
            "no pointwise density for a Dirac kernel; use the reduced circle form")
    return (radial_density(kernel.radial, r, kernel.weight)
            * angular_density(kernel.angular, cos_theta))
