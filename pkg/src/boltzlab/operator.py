"""Pointwise and gridded evaluation of the collision operator.

For the singular kernel every admissible collision at v is a unit square
v, v+sigma, v+sigma+sigma_perp, v+sigma_perp, so the gain and loss terms
are W times circle means:

    Q+(v) = W * mean_sigma f(v + sigma) f(v + sigma_perp)
    Q-(v) = W * f(v) * mean_sigma f(v + sigma + sigma_perp)

evaluated with an equispaced trapezoid rule (n_sigma nodes, divisible by
4 so the sigma_perp samples are an index roll of the sigma samples).
Mollified kernels get the full double quadrature: polar shells around v
inside the radial bump window, and the same trapezoid circle for sigma
with the angular bump masking the nodes.

Outer integrals over v use radial cells with two Gauss-Legendre nodes
per cell against 2*pi*r dr, which is exact for step profiles whenever
their breakpoints are cell edges.  Radially symmetric densities are
integrated on one representative ray; grids use n_angular_outer rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, KernelFormError, NumericalError
from .kernels import (SQRT2, KernelSpec, angular_density, radial_density)
from .profiles import (GridSpec, RadialStepProfile, ScalarGridField, as_point,
                       _require)

# Rows per chunk are fixed so reduction order never depends on memory.
_CHUNK_BUDGET = 4_000_000


@lru_cache(maxsize=8)
def _sigma_trig(n: int):
    psi = 2.0 * np.pi * np.arange(n) / n
    out = (np.cos(psi), np.sin(psi),
           np.cos(psi + np.pi / 4.0), np.sin(psi + np.pi / 4.0))
    for a in out:
        a.setflags(write=False)
    return out


def _check_n_sigma(n: int) -> None:
    _require(n >= 16 and n % 4 == 0, "n_sigma >= 16 and divisible by 4")


@dataclass(frozen=True)
class OperatorQuadrature:
    """Quadrature controlling all operator and diagnostic integrals.

    polar_radii are radial cell edges for outer integrals, starting at 0;
    n_sigma is the trapezoid node count on the unit circle; vstar_grid,
    when set, switches the mollified double integral to a Cartesian
    partner-velocity sum on that grid.
    """

    n_sigma: int
    polar_radii: np.ndarray
    n_angular_outer: int = 16
    vstar_grid: Optional[GridSpec] = None
    n_bump_radial: int = 17

    def __post_init__(self) -> None:
        _check_n_sigma(self.n_sigma)
        edges = np.asarray(self.polar_radii, dtype=float)
        object.__setattr__(self, "polar_radii", edges)
        _require(edges.ndim == 1 and edges.size >= 2, "at least one radial cell")
        _require(edges[0] == 0.0, "radial edges start at 0")
        _require(bool(np.all(np.diff(edges) > 0)), "radial edges strictly increasing")
        _require(self.n_angular_outer >= 1, "n_angular_outer >= 1")

    @property
    def r_max(self) -> float:
        return float(self.polar_radii[-1])

    @property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.polar_radii)))

    def radial_nodes(self):
        """Nodes r_k and weights w_k with sum_k w_k g(r_k) ~ int g(r) 2 pi r dr."""
        e = self.polar_radii
        lo, hi = e[:-1], e[1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        off = half / math.sqrt(3.0)
        r = np.concatenate((mid - off, mid + off))
        w = np.concatenate((half * 2.0 * np.pi * (mid - off),
                            half * 2.0 * np.pi * (mid + off)))
        order = np.argsort(r, kind="stable")
        return r[order], w[order]

    def scaled(self, factor: float) -> "OperatorQuadrature":
        """Uniformly refine: n_sigma * factor, cell widths / factor."""
        if factor == 1.0:
            return self
        _require(factor > 0, "quad scale factor > 0")
        n = int(round(self.n_sigma * factor / 4.0)) * 4
        e = self.polar_radii
        parts = [np.array([0.0])]
        k = max(1, int(math.ceil(factor)))
        for lo, hi in zip(e[:-1], e[1:]):
            parts.append(np.linspace(lo, hi, k + 1)[1:])
        return OperatorQuadrature(max(16, n), np.concatenate(parts),
                                  self.n_angular_outer, self.vstar_grid,
                                  self.n_bump_radial)

    def fingerprint(self) -> dict:
        return {"n_sigma": self.n_sigma,
                "n_radial_cells": int(self.polar_radii.size - 1),
                "min_shell_spacing": self.min_spacing,
                "n_angular_outer": self.n_angular_outer}


def make_quadrature(r_max: float, *, breakpoints: Sequence[float] = (),
                    critical_radii: Sequence[float] = (),
                    extra_edges: Sequence[float] = (),
                    fine_spacing: float = 0.01, coarse_spacing: float = 0.05,
                    window_halfwidth: float = 0.3, n_sigma: int = 16384,
                    n_angular_outer: int = 16,
                    quad_scale: float = 1.0) -> OperatorQuadrature:
    """Build radial cells refined around the critical radii.

    Breakpoints, region bounds and critical radii all become exact cell
    edges; windows of the given half-width around each critical radius
    are filled at ``fine_spacing``, everything else at ``coarse_spacing``.
    ``quad_scale`` uniformly refines both spacings and the circle rule.
    """
    _require(r_max > 0, "r_max > 0")
    fine = fine_spacing / quad_scale
    coarse = coarse_spacing / quad_scale
    n_sig = max(16, int(round(n_sigma * quad_scale / 4.0)) * 4)

    crit = [c for c in critical_radii if 0.0 < c < r_max]
    mandatory = {0.0, float(r_max)}
    for src in (breakpoints, crit, extra_edges):
        mandatory.update(float(x) for x in src if 0.0 < x < r_max)
    edges = np.array(sorted(mandatory))
    # Merge near-duplicates.
    keep = np.concatenate(([True], np.diff(edges) > 1e-9))
    edges = edges[keep]
    if edges[-1] != r_max:
        edges = np.append(edges, r_max)

    windows = [(max(0.0, c - window_halfwidth), min(r_max, c + window_halfwidth))
               for c in crit]

    def spacing_for(lo: float, hi: float) -> float:
        overlaps = any(lo < w_hi and hi > w_lo for w_lo, w_hi in windows)
        return fine if overlaps else coarse

    parts = [np.array([0.0])]
    for lo, hi in zip(edges[:-1], edges[1:]):
        target = spacing_for(lo, hi)
        cells = max(1, int(math.ceil((hi - lo) / target - 1e-12)))
        parts.append(np.linspace(lo, hi, cells + 1)[1:])
    return OperatorQuadrature(n_sig, np.concatenate(parts),
                              n_angular_outer=n_angular_outer)


def profile_kink_radii(breakpoints: Sequence[float]) -> np.ndarray:
    """Radii where circle-reduced operator values of a step profile kink.

    For each profile breakpoint b these are the tangency radii of the
    corner circle (|b - 1|, b + 1), of the partner circle (|b - sqrt 2|,
    b + sqrt 2), and the radii where the two corner crossings coincide,
    (-+ sqrt 2 + sqrt(4 b^2 - 2)) / 2.
    """
    kinks = set()
    for b in np.asarray(breakpoints, dtype=float):
        for d in (1.0, SQRT2):
            kinks.add(abs(b - d))
            kinks.add(b + d)
        disc = 4.0 * b * b - 2.0
        if disc > 0:
            root = math.sqrt(disc)
            kinks.add(0.5 * (root - SQRT2))
            kinks.add(0.5 * (root + SQRT2))
    return np.array(sorted(k for k in kinks if k > 1e-12))


def quadrature_for_profile(profile, *, rho: Optional[float] = None,
                           kink_window: Optional[float] = None,
                           **kwargs) -> OperatorQuadrature:
    """Quadrature adapted to a radial profile.

    Profile breakpoints and every operator kink radius become cell edges;
    the feature radii (ball edge, the three collision rings, the source
    ring edges, the support edge) get wide fine windows and the remaining
    kinks narrow ones, sized to cover any smoothing ramps.
    """
    breaks = np.asarray(profile.breakpoints, dtype=float)
    r_max = float(breaks[-1])
    p = getattr(profile, "params", None)
    if rho is None:
        rho = p.rho if p is not None else 0.1
    s = float(getattr(profile, "smoothing_width", 0.0))
    critical = set()
    if p is not None:
        critical.update((p.rho, 1.0, SQRT2, 2.0 * SQRT2,
                         p.r_ring - p.rho, p.r_ring + p.rho, p.r_outer))
    kinks = profile_kink_radii(breaks)
    if kink_window is None:
        kink_window = max(0.06, 3.0 * s)
    kwargs.setdefault("fine_spacing", rho / 10.0)
    kwargs.setdefault("window_halfwidth", 3.0 * rho)
    quad = make_quadrature(r_max, breakpoints=breaks,
                           critical_radii=sorted(critical),
                           extra_edges=kinks, **kwargs)
    # Second refinement tier: narrow fine windows around every kink.
    scale = kwargs.get("quad_scale", 1.0)
    fine = kwargs["fine_spacing"] / scale
    edges = quad.polar_radii
    parts = [np.array([0.0])]
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        near_kink = bool(np.any(np.abs(kinks - mid) <= kink_window))
        if near_kink and (hi - lo) > fine * (1 + 1e-9):
            cells = int(math.ceil((hi - lo) / fine - 1e-12))
            parts.append(np.linspace(lo, hi, cells + 1)[1:])
        else:
            parts.append(np.array([hi]))
    return OperatorQuadrature(quad.n_sigma, np.concatenate(parts),
                              n_angular_outer=quad.n_angular_outer)


def _chunks(total: int, per_row: int) -> Iterable[slice]:
    step = max(1, _CHUNK_BUDGET // max(1, per_row))
    for start in range(0, total, step):
        yield slice(start, min(total, start + step))


def _circle_radii(r: np.ndarray, n_sigma: int):
    """Radii |v + sigma_k| and |v + sigma_k + sigma_perp_k| for v on the
    positive x-axis at radii r.  Rotation invariance of radial densities
    makes this one ray representative."""
    c, _, c45, _ = _sigma_trig(n_sigma)
    r = r[:, None]
    r_prime = np.sqrt(np.maximum(r * r + 1.0 + 2.0 * r * c[None, :], 0.0))
    r_star = np.sqrt(np.maximum(r * r + 2.0 + 2.0 * SQRT2 * r * c45[None, :], 0.0))
    return r_prime, r_star


def _circle_points(pts: np.ndarray, n_sigma: int):
    c, s, _, _ = _sigma_trig(n_sigma)
    sig = np.stack((c, s), axis=-1)                    # (n, 2)
    p_prime = pts[:, None, :] + sig[None, :, :]
    p_star = pts[:, None, :] + sig[None, :, :] + np.stack((-s, c), axis=-1)[None, :, :]
    return p_prime, p_star


class OperatorTerms:
    """Per-point operator values and the companion integrals built on them."""

    __slots__ = ("f", "gain", "loss", "l_pot", "sym", "sym_min", "loss_rate")

    def __init__(self, m: int):
        self.f = np.empty(m)
        self.gain = np.empty(m)
        self.loss = np.empty(m)
        self.l_pot = np.empty(m)
        self.sym = np.empty(m)
        self.sym_min = np.inf
        self.loss_rate = np.empty(m)

    @property
    def q(self) -> np.ndarray:
        return self.gain - self.loss


def singular_terms(f, where, quad_or_n, W: float = 1.0,
                   need_logs: bool = True) -> OperatorTerms:
    """Evaluate gain, loss, the log-potential and the symmetrized
    production integrand at many points in one pass.

    ``where`` is either a radii array (radial evaluators) or an (m, 2)
    point array.  The log-based quantities require the density to be
    strictly positive on every sampled circle.
    """
    n = quad_or_n.n_sigma if isinstance(quad_or_n, OperatorQuadrature) else int(quad_or_n)
    _check_n_sigma(n)
    where = np.asarray(where, dtype=float)
    radial_mode = where.ndim == 1
    m = where.shape[0]
    out = OperatorTerms(m)
    roll = n // 4
    for sl in _chunks(m, n):
        if radial_mode:
            r_prime, r_star = _circle_radii(where[sl], n)
            F = f.eval_radii(r_prime)
            F2 = f.eval_radii(r_star)
            fv = f.eval_radii(where[sl])
        else:
            p_prime, p_star = _circle_points(where[sl], n)
            F = f(p_prime)
            F2 = f(p_star)
            fv = f(where[sl])
        Fp = np.roll(F, -roll, axis=1)
        out.f[sl] = fv
        out.gain[sl] = W * np.mean(F * Fp, axis=1)
        mean_fstar = np.mean(F2, axis=1)
        out.loss_rate[sl] = W * mean_fstar
        out.loss[sl] = fv * out.loss_rate[sl]
        if need_logs:
            if np.min(F) <= 0.0 or np.min(F2) <= 0.0 or np.min(fv) <= 0.0:
                raise NumericalError(
                    "density attains 0 where a logarithm is required; "
                    "use a positivity floor")
            logF = np.log(F)
            logF2 = np.log(F2)
            log_fv = np.log(fv)[:, None]
            log_ratio = log_fv + logF2 - logF - np.roll(logF, -roll, axis=1)
            out.l_pot[sl] = W * np.mean(F2 * log_ratio, axis=1)
            sym_samples = (F * Fp - fv[:, None] * F2) * (-log_ratio)
            out.sym[sl] = 0.25 * W * np.mean(sym_samples, axis=1)
            smin = float(np.min(sym_samples))
            out.sym_min = min(out.sym_min, smin)
        else:
            out.l_pot[sl] = np.nan
            out.sym[sl] = np.nan
    return out


def _point_terms(f, v, quad, W: float, need_logs: bool = False) -> OperatorTerms:
    return singular_terms(f, as_point(v)[None, :], quad, W, need_logs=need_logs)


def q_gain_singular(f, v, quad: OperatorQuadrature, W: float = 1.0) -> float:
    """Gain term W * mean_sigma f(v+sigma) f(v+sigma_perp); nonnegative."""
    return float(_point_terms(f, v, quad, W).gain[0])


def q_loss_singular(f, v, quad: OperatorQuadrature, W: float = 1.0) -> float:
    """Loss term W * f(v) * mean_sigma f(v + sigma + sigma_perp).

    The partner velocity sweeps the circle of radius sqrt(2) about v."""
    return float(_point_terms(f, v, quad, W).loss[0])


def q_singular(f, v, quad: OperatorQuadrature, W: float = 1.0) -> float:
    t = _point_terms(f, v, quad, W)
    return float(t.gain[0] - t.loss[0])


# ---------------------------------------------------------------------------
# Mollified kernels: full double quadrature.


def _bump_window_offsets(kernel: KernelSpec, n_sigma: int):
    """Angular factor sampled on the relative trapezoid lattice.

    With sigma and the partner direction both on the same n-node circle
    the deviation angle depends only on the index offset, so b(cos theta)
    collapses to a length-n vector; only its support contributes.
    """
    d = np.arange(n_sigma)
    theta = 2.0 * np.pi * d / n_sigma - np.pi
    bvals = angular_density(kernel.angular, np.cos(theta))
    idx = np.nonzero(bvals > 0.0)[0]
    if idx.size == 0:
        raise ConfigError("angular bump too narrow for n_sigma: no circle "
                          "nodes fall inside its support")
    return idx, bvals[idx]


def mollified_terms(f, pts: np.ndarray, kernel: KernelSpec,
                    quad: OperatorQuadrature,
                    need_logs: bool = True) -> OperatorTerms:
    """Operator integrals for a mollified kernel at the given points.

    Outer quadrature: midpoint shells around each point inside the radial
    bump window times the full trapezoid circle of partner directions;
    inner: trapezoid circle for sigma masked to the angular bump support.
    The kernel weight keeps these on the same scale as the circle form.
    """
    if not kernel.has_density:
        raise KernelFormError("mollified quadrature needs bump factors; "
                              "Dirac kernels use the reduced circle form")
    if quad.vstar_grid is not None:
        return _mollified_terms_cartesian(f, pts, kernel, quad, need_logs)
    n = quad.n_sigma
    rad = kernel.radial
    n_r = quad.n_bump_radial
    dr = 2.0 * rad.eps_r / n_r
    r_nodes = rad.r0 - rad.eps_r + dr * (np.arange(n_r) + 0.5)
    phi_w = radial_density(rad, r_nodes, kernel.weight) * r_nodes * dr  # (n_r,)

    offs, bvals = _bump_window_offsets(kernel, n)
    dpsi = 2.0 * np.pi / n
    c, s, _, _ = _sigma_trig(n)
    e_phi = np.stack((c, s), axis=-1)                   # (n, 2) partner directions
    m = pts.shape[0]
    out = OperatorTerms(m)
    fv = np.asarray(f(pts), dtype=float)
    out.f[:] = fv
    sig_idx = (np.arange(n)[:, None] + offs[None, :]) % n       # (n, n_off)
    sig = np.stack((c[sig_idx], s[sig_idx]), axis=-1)           # (n, n_off, 2)
    wB = phi_w[:, None, None] * (dpsi * dpsi) * bvals[None, None, :]

    for i in range(m):
        v = pts[i]
        vstar = v[None, None, :] + r_nodes[:, None, None] * e_phi[None, :, :]
        f_star = f(vstar)                               # (n_r, n)
        mid = 0.5 * (v[None, None, :] + vstar)
        half_gap = 0.5 * r_nodes[:, None, None]
        vp = mid[:, :, None, :] + half_gap[:, :, None, :] * sig[None, :, :, :]
        vsp = mid[:, :, None, :] - half_gap[:, :, None, :] * sig[None, :, :, :]
        f_p = f(vp)                                     # (n_r, n, n_off)
        f_sp = f(vsp)
        out.gain[i] = float(np.sum(wB * f_p * f_sp))
        mean_star = float(np.sum(wB * f_star[:, :, None]))
        out.loss_rate[i] = mean_star
        out.loss[i] = fv[i] * mean_star
        if need_logs:
            if np.min(f_p) <= 0 or np.min(f_sp) <= 0 or np.min(f_star) <= 0 or fv[i] <= 0:
                raise NumericalError(
                    "density attains 0 where a logarithm is required; "
                    "use a positivity floor")
            log_ratio = (math.log(fv[i]) + np.log(f_star)[:, :, None]
                         - np.log(f_p) - np.log(f_sp))
            out.l_pot[i] = float(np.sum(wB * f_star[:, :, None] * log_ratio))
            sym_samples = (f_p * f_sp - fv[i] * f_star[:, :, None]) * (-log_ratio)
            out.sym[i] = 0.25 * float(np.sum(wB * sym_samples))
            out.sym_min = min(out.sym_min, float(np.min(sym_samples)))
        else:
            out.l_pot[i] = np.nan
            out.sym[i] = np.nan
    return out


def _mollified_terms_cartesian(f, pts, kernel, quad, need_logs) -> OperatorTerms:
    """Partner integral on the Cartesian vstar grid (validation path)."""
    spec = quad.vstar_grid
    ax = spec.axis()
    nodes = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    h2 = spec.spacing ** 2
    n = quad.n_sigma
    c, s, _, _ = _sigma_trig(n)
    sig = np.stack((c, s), axis=-1)
    rad = kernel.radial
    m = pts.shape[0]
    out = OperatorTerms(m)
    fv = np.asarray(f(pts), dtype=float)
    out.f[:] = fv
    for i in range(m):
        v = pts[i]
        rel = nodes - v[None, :]
        dist = np.hypot(rel[:, 0], rel[:, 1])
        keep = (np.abs(dist - rad.r0) < rad.eps_r) & (dist > 1e-12)
        vstar = nodes[keep]
        dist = dist[keep]
        phi = radial_density(rad, dist, kernel.weight)
        f_star = f(vstar)
        cos_theta = (sig @ (v - vstar).T).T / dist[:, None]      # (k, n)
        b = angular_density(kernel.angular, cos_theta)
        mid = 0.5 * (v[None, :] + vstar)
        vp = mid[:, None, :] + 0.5 * dist[:, None, None] * sig[None, :, :]
        vsp = mid[:, None, :] - 0.5 * dist[:, None, None] * sig[None, :, :]
        f_p = f(vp)
        f_sp = f(vsp)
        w = h2 * (2.0 * np.pi / n) * phi[:, None] * b
        out.gain[i] = float(np.sum(w * f_p * f_sp))
        mean_star = float(np.sum(w * f_star[:, None]))
        out.loss_rate[i] = mean_star
        out.loss[i] = fv[i] * mean_star
        if need_logs:
            active = w > 0
            if (fv[i] <= 0 or np.min(f_star, initial=np.inf) <= 0
                    or np.min(f_p[active], initial=np.inf) <= 0
                    or np.min(f_sp[active], initial=np.inf) <= 0):
                raise NumericalError("density attains 0 where a logarithm is "
                                     "required; use a positivity floor")
            log_ratio = (math.log(fv[i]) + np.log(f_star)[:, None]
                         - np.log(np.maximum(f_p, 1e-300))
                         - np.log(np.maximum(f_sp, 1e-300)))
            out.l_pot[i] = float(np.sum(w * f_star[:, None] * log_ratio))
            sym_samples = (f_p * f_sp - fv[i] * f_star[:, None]) * (-log_ratio)
            out.sym[i] = 0.25 * float(np.sum(w * sym_samples))
            if np.any(active):
                out.sym_min = min(out.sym_min, float(np.min(sym_samples[active])))
        else:
            out.l_pot[i] = np.nan
            out.sym[i] = np.nan
    return out


def q_mollified(f, v, kernel: KernelSpec, quad: OperatorQuadrature) -> float:
    """Collision operator under a mollified kernel at one velocity."""
    t = mollified_terms(f, as_point(v)[None, :], kernel, quad, need_logs=False)
    return float(t.gain[0] - t.loss[0])


# ---------------------------------------------------------------------------
# Grid sweeps.


def _lattice_shift_eval(padded: np.ndarray, pad: int, n: int, h: float,
                        shift, out: Optional[np.ndarray] = None,
                        scratch: Optional[np.ndarray] = None) -> np.ndarray:
    """Bilinear samples of a gridded field at every node translated by
    ``shift``; pure slicing because the query set is the lattice itself."""
    a, b = shift[0] / h, shift[1] / h
    ia, ib = int(math.floor(a)), int(math.floor(b))
    fa, fb = a - ia, b - ib
    i0, j0 = pad + ia, pad + ib
    p = padded
    if out is None:
        out = np.empty((n, n))
    if scratch is None:
        scratch = np.empty((n, n))
    np.multiply(p[i0:i0 + n, j0:j0 + n], (1 - fa) * (1 - fb), out=out)
    np.multiply(p[i0 + 1:i0 + 1 + n, j0:j0 + n], fa * (1 - fb), out=scratch)
    out += scratch
    np.multiply(p[i0:i0 + n, j0 + 1:j0 + 1 + n], (1 - fa) * fb, out=scratch)
    out += scratch
    np.multiply(p[i0 + 1:i0 + 1 + n, j0 + 1:j0 + 1 + n], fa * fb, out=scratch)
    out += scratch
    return out


def _grid_gain_loss(field: ScalarGridField, n_sigma: int, W: float):
    """(gain, loss_rate) arrays over all grid nodes for the singular kernel."""
    n = field.spec.n_per_axis
    h = field.spec.spacing
    c, s, c45, s45 = _sigma_trig(n_sigma)
    roll = n_sigma // 4
    gain_sum = np.zeros((n, n))
    loss_sum = np.zeros((n, n))
    prof = field.profile
    if prof is not None:
        ax = field.spec.axis()
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        for k in range(n_sigma):
            kp = (k + roll) % n_sigma
            Fk = prof.eval_radii(np.hypot(X + c[k], Y + s[k]))
            Fkp = prof.eval_radii(np.hypot(X + c[kp], Y + s[kp]))
            gain_sum += Fk * Fkp
            loss_sum += prof.eval_radii(
                np.hypot(X + SQRT2 * c45[k], Y + SQRT2 * s45[k]))
    else:
        pad = int(math.ceil(SQRT2 / h)) + 2
        padded = np.full((n + 2 * pad, n + 2 * pad), field.floor_delta)
        padded[pad:pad + n, pad:pad + n] = field.values
        scratch = np.empty((n, n))
        bufa = np.empty((n, n))
        bufb = np.empty((n, n))
        for k in range(n_sigma):
            kp = (k + roll) % n_sigma
            Fk = _lattice_shift_eval(padded, pad, n, h, (c[k], s[k]),
                                     out=bufa, scratch=scratch)
            Fkp = _lattice_shift_eval(padded, pad, n, h, (c[kp], s[kp]),
                                      out=bufb, scratch=scratch)
            Fk *= Fkp
            gain_sum += Fk
            _lattice_shift_eval(padded, pad, n, h,
                                (SQRT2 * c45[k], SQRT2 * s45[k]),
                                out=bufb, scratch=scratch)
            loss_sum += bufb
    gain = W * gain_sum / n_sigma
    loss_rate = W * loss_sum / n_sigma
    return gain, loss_rate


def q_on_grid(f_field: ScalarGridField, quad: OperatorQuadrature,
              kernel: Optional[KernelSpec] = None,
              W: Optional[float] = None) -> ScalarGridField:
    """Collision operator at every grid node.

    Off-node densities come from the attached analytic profile when there
    is one, and from bilinear interpolation otherwise.
    """
    kern = kernel if kernel is not None else KernelSpec.square_singular(
        1.0 if W is None else W)
    if kern.is_singular:
        gain, loss_rate = _grid_gain_loss(f_field, quad.n_sigma, kern.weight)
        qvals = gain - f_field.values * loss_rate
    elif kern.has_density:
        ax = f_field.spec.axis()
        pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
        src = f_field.profile if f_field.profile is not None else f_field
        t = mollified_terms(src, pts, kern, quad, need_logs=False)
        qvals = t.q.reshape(f_field.values.shape)
    else:
        raise KernelFormError("kernel is neither fully singular nor fully mollified")
    if not np.all(np.isfinite(qvals)):
        raise NumericalError("collision operator produced non-finite values")
    return ScalarGridField(f_field.spec, qvals, floor_delta=0.0,
                           profile=None, nonnegative=False)


def loss_rate_on_grid(f_field: ScalarGridField, quad: OperatorQuadrature,
                      W: float = 1.0) -> np.ndarray:
    """Per-node loss rate Q-/f = W * mean_sigma f(v + sigma + sigma_perp)."""
    _, loss_rate = _grid_gain_loss(f_field, quad.n_sigma, W)
    return loss_rate


def collision_moments(q_field: ScalarGridField):
    """(mass rate, momentum rate, energy rate) of a Q field by the grid rule."""
    mass, mom, energy = q_field.moments() if q_field.nonnegative else _signed_moments(q_field)
    return mass, mom, energy


def _signed_moments(q_field: ScalarGridField):
    h2 = q_field.spec.spacing ** 2
    ax = q_field.spec.axis()
    v = q_field.values
    mass = h2 * float(np.sum(v))
    px = h2 * float(np.sum(v * ax[:, None]))
    py = h2 * float(np.sum(v * ax[None, :]))
    energy = h2 * float(np.sum(v * (ax[:, None] ** 2 + ax[None, :] ** 2)))
    return mass, np.array([px, py]), energy


def moment_rates(f, quad: OperatorQuadrature, kernel: Optional[KernelSpec] = None):
    """Collision invariants by the outer polar quadrature.

    Returns a dict with mass/momentum/energy rates of Q and the matching
    absolute normalizers int |Q| {1, |v|, |v|^2} dv.  Radial densities use
    the representative-ray reduction, for which the momentum rate vanishes
    identically.
    """
    kern = kernel if kernel is not None else KernelSpec.square_singular()
    r, w = quad.radial_nodes()
    radial = bool(getattr(f, "radial", False))
    if radial:
        if kern.is_singular:
            t = singular_terms(f, r, quad, kern.weight, need_logs=False)
            qv = t.q
        else:
            pts = np.stack((r, np.zeros_like(r)), axis=-1)
            qv = mollified_terms(f, pts, kern, quad, need_logs=False).q
        aq = np.abs(qv)
        return {
            "mass_rate": float(np.sum(w * qv)),
            "momentum_rate": np.zeros(2),
            "energy_rate": float(np.sum(w * qv * r * r)),
            "norm_mass": float(np.sum(w * aq)),
            "norm_momentum": float(np.sum(w * aq * r)),
            "norm_energy": float(np.sum(w * aq * r * r)),
        }
    n_ang = quad.n_angular_outer
    ang = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
    pts = (r[:, None, None] * np.stack((np.cos(ang), np.sin(ang)), axis=-1)[None, :, :])
    pts = pts.reshape(-1, 2)
    ww = np.repeat(w / n_ang, n_ang)
    if kern.is_singular:
        t = singular_terms(f, pts, quad, kern.weight, need_logs=False)
        qv = t.q
    else:
        qv = mollified_terms(f, pts, kern, quad, need_logs=False).q
    aq = np.abs(qv)
    rr = np.hypot(pts[:, 0], pts[:, 1])
    return {
        "mass_rate": float(np.sum(ww * qv)),
        "momentum_rate": np.array([float(np.sum(ww * qv * pts[:, 0])),
                                   float(np.sum(ww * qv * pts[:, 1]))]),
        "energy_rate": float(np.sum(ww * qv * rr * rr)),
        "norm_mass": float(np.sum(ww * aq)),
        "norm_momentum": float(np.sum(ww * aq * rr)),
        "norm_energy": float(np.sum(ww * aq * rr * rr)),
    }
