"""Entropy, entropy production, and its time derivative.

All quantities are outer integrals over velocity space of pointwise
operator values:

    H      = -int f log f
    D      = -int Q log f                  (direct form)
    D      = 1/4 int mean_sigma (f'f'* - f f*) log(f'f'*/(f f*))  (symmetric)
    dD/dt  = -int Q^2/f + int Q L,   L = W mean_sigma f* log(f f*/(f' f'*))

The two D forms agree analytically; numerically they share the outer
quadrature, so their difference doubles as a quadrature cross-check.
Every report decomposes the dD/dt terms over named annular regions, with
the vacuum annulus (where only the positivity floor lives) kept separate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, NumericalError, RegionMapError
from .kernels import SQRT2, KernelSpec
from .operator import (OperatorQuadrature, OperatorTerms, mollified_terms,
                       singular_terms)
from .profiles import as_point, _require

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Region:
    """A named union of radial intervals [lo, hi)."""

    name: str
    intervals: tuple

    @property
    def r_lo(self) -> float:
        return min(lo for lo, _ in self.intervals)

    @property
    def r_hi(self) -> float:
        return max(hi for _, hi in self.intervals)


@dataclass(frozen=True)
class AnnulusDecomposition:
    """Disjoint named regions covering [0, r_domain]."""

    regions: tuple

    def __post_init__(self) -> None:
        segs = sorted((lo, hi, i) for i, reg in enumerate(self.regions)
                      for lo, hi in reg.intervals)
        _require(len(segs) > 0 and segs[0][0] == 0.0,
                 "regions start at radius 0")
        for (lo0, hi0, _), (lo1, _, _) in zip(segs[:-1], segs[1:]):
            _require(hi0 <= lo1 + 1e-12, "regions are disjoint")
            _require(lo1 <= hi0 + 1e-12, "regions cover the domain with no gap")
        object.__setattr__(self, "_bounds",
                           np.array([s[0] for s in segs] + [segs[-1][1]]))
        object.__setattr__(self, "_ids", np.array([s[2] for s in segs]))

    @property
    def r_domain(self) -> float:
        return float(self._bounds[-1])

    @property
    def names(self):
        return [r.name for r in self.regions]

    def edges(self) -> np.ndarray:
        return np.unique(self._bounds)

    def classify(self, radii: np.ndarray) -> np.ndarray:
        seg = np.clip(np.searchsorted(self._bounds, radii, side="right") - 1,
                      0, self._ids.size - 1)
        return self._ids[seg]

    def index(self, name: str) -> int:
        return self.names.index(name)


def default_regions(rho: float = 0.1, r_domain: float = 8.0,
                    r_support: float = 5.0) -> AnnulusDecomposition:
    """Inner ball, the three gain/loss rings, the source ring, the bulk,
    and the vacuum annulus.  Rings use half-width rho; the source ring at
    sqrt(5) uses 2 rho because its feature is that wide."""
    ring = [(1.0, rho), (SQRT2, rho), (2.0 * SQRT2, rho), (math.sqrt(5.0), 2 * rho)]
    names = ["ring_1", "ring_sqrt2", "ring_2sqrt2", "ring_sqrt5"]
    marks = sorted(zip([c - w for c, w in ring], [c + w for c, w in ring], names))
    prev = rho
    bulk: list = []
    regions = [Region("inner_ball", ((0.0, rho),))]
    for lo, hi, name in marks:
        _require(prev <= lo + 1e-12, "ring regions must not overlap")
        if lo > prev:
            bulk.append((prev, lo))
        regions.append(Region(name, ((lo, hi),)))
        prev = hi
    _require(prev <= r_support, "rings stay inside the support disk")
    if prev < r_support:
        bulk.append((prev, r_support))
    regions.append(Region("bulk", tuple(bulk)))
    regions.append(Region("vacuum", ((r_support, r_domain),)))
    return AnnulusDecomposition(tuple(regions))


@dataclass
class RegionRow:
    """Per-region contributions and extrema."""

    name: str
    r_lo: float
    r_hi: float
    neg_term: float = 0.0        # -int_R Q^2/f
    pos_term: float = 0.0        # int_R Q L
    d_direct_part: float = 0.0   # -int_R Q log f
    max_qplus: float = 0.0
    max_qminus: float = 0.0
    max_l: float = 0.0
    share_neg_term: float = 0.0
    share_pos_term: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DiagnosticsReport:
    """All entropy diagnostics of one density under one kernel."""

    entropy_h: float
    d_direct: float
    d_symmetric: float
    dtd_negative_term: float
    dtd_positive_term: float
    dtd_total: float
    floor_delta: float
    quadrature: dict
    per_region: list
    mass: float
    sym_min_sample: float
    neg_term_f_ge_1: float
    vacuum_neg_term: float
    vacuum_pos_term: float
    kernel: dict = dc_field(default_factory=dict)
    params: Optional[dict] = None

    def region(self, name: str) -> RegionRow:
        for row in self.per_region:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "per_region"}
        d["per_region"] = [row.to_json() for row in self.per_region]
        return d

    def write_region_csv(self, path) -> None:
        cols = ("region,r_lo,r_hi,max_qplus,max_qminus,max_l,"
                "share_neg_term,share_pos_term")
        with open(path, "w") as fh:
            fh.write(cols + "\n")
            for row in self.per_region:
                fh.write(f"{row.name},{row.r_lo!r},{row.r_hi!r},"
                         f"{row.max_qplus!r},{row.max_qminus!r},{row.max_l!r},"
                         f"{row.share_neg_term!r},{row.share_pos_term!r}\n")


def _outer_nodes(f, quad: OperatorQuadrature):
    """Quadrature nodes for int g(v) dv: one ray for radial densities,
    n_angular_outer rays otherwise.  Returns (radii, weights, points)."""
    r, w = quad.radial_nodes()
    if getattr(f, "radial", False):
        return r, w, None
    n_ang = quad.n_angular_outer
    ang = TWO_PI * (np.arange(n_ang) + 0.5) / n_ang
    dirs = np.stack((np.cos(ang), np.sin(ang)), axis=-1)
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    return np.repeat(r, n_ang), np.repeat(w / n_ang, n_ang), pts


def _outer_terms(f, quad: OperatorQuadrature, kernel: KernelSpec,
                 need_logs: bool = True):
    radii, w, pts = _outer_nodes(f, quad)
    if kernel.is_singular:
        where = radii if pts is None else pts
        terms = singular_terms(f, where, quad, kernel.weight, need_logs=need_logs)
    else:
        if pts is None:
            pts = np.stack((radii, np.zeros_like(radii)), axis=-1)
        terms = mollified_terms(f, pts, kernel, quad, need_logs=need_logs)
    return radii, w, terms


def entropy(f, quad: OperatorQuadrature) -> float:
    """H = -int f log f over the domain disk, with 0 log 0 = 0."""
    radii, w, pts = _outer_nodes(f, quad)
    vals = f.eval_radii(radii) if pts is None else np.asarray(f(pts), float)
    out = np.zeros_like(vals)
    pos = vals > 0.0
    out[pos] = -vals[pos] * np.log(vals[pos])
    return float(np.sum(w * out))


def _default_kernel(kernel: Optional[KernelSpec]) -> KernelSpec:
    return kernel if kernel is not None else KernelSpec.square_singular()


def entropy_production_direct(f, quad: OperatorQuadrature,
                              kernel: Optional[KernelSpec] = None) -> float:
    """D = -int Q log f; requires a strictly positive density."""
    kern = _default_kernel(kernel)
    _, w, t = _outer_terms(f, quad, kern, need_logs=True)
    return float(np.sum(w * (-(t.q) * np.log(t.f))))


def entropy_production_symmetric(f, quad: OperatorQuadrature,
                                 kernel: Optional[KernelSpec] = None) -> float:
    value, _ = symmetric_production_detail(f, quad, kernel)
    return value


def symmetric_production_detail(f, quad: OperatorQuadrature,
                                kernel: Optional[KernelSpec] = None):
    """(D in symmetric form, smallest integrand sample).

    Each sample is (f'f'* - f f*) log(f'f'*/(f f*)) >= 0, so the returned
    minimum is a pointwise H-theorem witness.
    """
    kern = _default_kernel(kernel)
    _, w, t = _outer_terms(f, quad, kern, need_logs=True)
    return float(np.sum(w * t.sym)), float(t.sym_min)


def l_potential(f, v, quad: OperatorQuadrature,
                kernel: Optional[KernelSpec] = None) -> float:
    """L(v) = W * mean_sigma f* log(f f* / (f' f'*)) on collision squares."""
    kern = _default_kernel(kernel)
    p = as_point(v)[None, :]
    if kern.is_singular:
        t = singular_terms(f, p, quad, kern.weight, need_logs=True)
    else:
        t = mollified_terms(f, p, kern, quad, need_logs=True)
    return float(t.l_pot[0])


def _regions_for(f, quad: OperatorQuadrature,
                 regions: Optional[AnnulusDecomposition]) -> AnnulusDecomposition:
    if regions is not None:
        return regions
    p = getattr(f, "params", None)
    rho = p.rho if p is not None else 0.1
    r_support = p.r_outer if p is not None else 5.0
    return default_regions(rho, quad.r_max, r_support)


def dt_entropy_production(f, quad: OperatorQuadrature,
                          kernel: Optional[KernelSpec] = None,
                          regions: Optional[AnnulusDecomposition] = None
                          ) -> DiagnosticsReport:
    """Evaluate both terms of the entropy-production derivative.

    dD/dt = -int Q^2/f dv + int Q L dv.  The first term is always <= 0;
    the report carries the per-region split of both terms, the direct and
    symmetric forms of D, and H.
    """
    kern = _default_kernel(kernel)
    regs = _regions_for(f, quad, regions)
    radii, w, t = _outer_terms(f, quad, kern, need_logs=True)
    q = t.q
    qsq = w * q * q / t.f
    ql = w * q * t.l_pot
    d_int = w * (-(q) * np.log(t.f))
    h_int = np.where(t.f > 0, -t.f * np.log(np.maximum(t.f, 1e-300)), 0.0) * w

    rid = regs.classify(radii)
    nreg = len(regs.regions)
    neg = np.zeros(nreg)
    pos = np.zeros(nreg)
    dpart = np.zeros(nreg)
    np.add.at(neg, rid, -qsq)
    np.add.at(pos, rid, ql)
    np.add.at(dpart, rid, d_int)

    rows = []
    for i, reg in enumerate(regs.regions):
        sel = rid == i
        rows.append(RegionRow(
            name=reg.name, r_lo=reg.r_lo, r_hi=reg.r_hi,
            neg_term=float(neg[i]), pos_term=float(pos[i]),
            d_direct_part=float(dpart[i]),
            max_qplus=float(np.max(t.gain[sel], initial=0.0)),
            max_qminus=float(np.max(t.loss[sel], initial=0.0)),
            max_l=float(np.max(np.abs(t.l_pot[sel]), initial=0.0)),
        ))
    neg_total = float(np.sum(neg))
    pos_total = float(np.sum(pos))
    for row in rows:
        row.share_neg_term = row.neg_term / neg_total if neg_total != 0 else 0.0
        row.share_pos_term = row.pos_term / pos_total if pos_total != 0 else 0.0

    vac = regs.index("vacuum") if "vacuum" in regs.names else None
    f_ge_1 = t.f >= 1.0
    sym_total = float(np.sum(w * t.sym))
    p = getattr(f, "params", None)
    report = DiagnosticsReport(
        entropy_h=float(np.sum(h_int)),
        d_direct=float(np.sum(d_int)),
        d_symmetric=sym_total,
        dtd_negative_term=neg_total,
        dtd_positive_term=pos_total,
        dtd_total=neg_total + pos_total,
        floor_delta=float(getattr(f, "floor_delta", 0.0)),
        quadrature=quad.fingerprint(),
        per_region=rows,
        mass=float(np.sum(w * t.f)),
        sym_min_sample=float(t.sym_min),
        neg_term_f_ge_1=float(np.sum(-qsq[f_ge_1])),
        vacuum_neg_term=float(neg[vac]) if vac is not None else 0.0,
        vacuum_pos_term=float(pos[vac]) if vac is not None else 0.0,
        kernel=kern.to_json(),
        params=None if p is None else {
            "a": p.a, "rho": p.rho, "c": p.c, "floor_delta": p.floor_delta,
            "r_domain": p.r_domain,
            "smoothing_width": getattr(f, "smoothing_width", 0.0)},
    )
    if not math.isfinite(report.dtd_total):
        raise NumericalError("non-finite entropy-production derivative")
    return report


# Region names where the gain / loss terms reach their peak scale a^2.
QPLUS_REGIONS = ("ring_1", "ring_sqrt2", "ring_2sqrt2")
QMINUS_REGIONS = ("inner_ball", "ring_sqrt2", "ring_sqrt5")


def region_report(f, quad: OperatorQuadrature,
                  kernel: Optional[KernelSpec] = None,
                  regions: Optional[AnnulusDecomposition] = None,
                  check: bool = True, tol_scale: float = 1.0
                  ) -> DiagnosticsReport:
    """Per-region magnitude map of Q+, Q-, and L, with a regression guard.

    The guard asserts, in bare circle-integral units (factor 2 pi / W),
    that Q+ reaches a^2/10 exactly on the rings at radii 1, sqrt(2) and
    2 sqrt(2); Q- exactly on the inner ball, the sqrt(2) ring and the
    source ring; and that L peaks on the sqrt(2) ring at size >= a^2 with
    every other region at least a factor log(a) below.  ``tol_scale``
    relaxes the lower bounds (used for mollified reruns).
    """
    kern = _default_kernel(kernel)
    report = dt_entropy_production(f, quad, kern, regions)
    if not check:
        return report
    p = getattr(f, "params", None)
    if p is None:
        raise ConfigError("region_report check requires a ring/spike density")
    a = p.a
    bare = TWO_PI / kern.weight
    threshold = a * a / 10.0
    failures = []
    for row in report.per_region:
        named_plus = row.name in QPLUS_REGIONS
        named_minus = row.name in QMINUS_REGIONS
        qp = row.max_qplus * bare
        qm = row.max_qminus * bare
        if named_plus and qp < threshold / tol_scale:
            failures.append(f"max Q+ on {row.name} = {qp:.3e} < a^2/10")
        if not named_plus and qp >= threshold:
            failures.append(f"max Q+ on {row.name} = {qp:.3e} >= a^2/10")
        if named_minus and qm < threshold / tol_scale:
            failures.append(f"max Q- on {row.name} = {qm:.3e} < a^2/10")
        if not named_minus and qm >= threshold:
            failures.append(f"max Q- on {row.name} = {qm:.3e} >= a^2/10")
    ring = report.region("ring_sqrt2")
    max_l_ring = ring.max_l * bare
    if max_l_ring < a * a / tol_scale:
        failures.append(f"max L on ring_sqrt2 = {max_l_ring:.3e} < a^2")
    log_a = math.log(a)
    for row in report.per_region:
        if row.name == "ring_sqrt2":
            continue
        if row.max_l * bare > max_l_ring / log_a * tol_scale:
            failures.append(
                f"max L on {row.name} = {row.max_l * bare:.3e} not a factor "
                f"log(a) below the sqrt(2) ring")
    argmax_l = max(report.per_region, key=lambda r: r.max_l).name
    if argmax_l != "ring_sqrt2":
        failures.append(f"L peaks on {argmax_l}, expected ring_sqrt2")
    if failures:
        raise RegionMapError("; ".join(failures))
    return report
