"""Configuration ingestion, the c-selection rule, sweeps, and scaling fits.

Everything here is deterministic: identical configs produce byte-identical
CSV/JSON outputs.  A ``seed`` key is accepted and echoed for use by
property tests but never feeds any computation.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .diagnostics import DiagnosticsReport, dt_entropy_production, region_report
from .errors import ConfigError, NumericalError
from .evolution import EvolutionConfig, TimeSeries, evolve
from .kernels import KernelSpec, SQRT2
from .operator import (OperatorQuadrature, make_quadrature, mollified_terms,
                       quadrature_for_profile, singular_terms)
from .profiles import (CounterexampleParams, GaussianDensity, GridSpec,
                       build_counterexample, _require)

DEFAULT_A_VALUES = (1e2, 10**2.5, 1e3, 10**3.5, 1e4)
DEFAULT_DELTA_VALUES = (1e-4, 1e-6, 1e-8)
C_GRID_RATIO = 10.0 ** (-0.25)
C_GRID_FLOOR = 1e-8


def choose_c(a: float, rho: float = 0.1, floor_delta: float = 1e-6,
             r_domain: float = 8.0, quad: Optional[OperatorQuadrature] = None,
             kernel: Optional[KernelSpec] = None,
             smoothing_width: float = 0.0, n_probes: int = 24,
             margin: float = 0.1) -> float:
    """Largest c on a geometric grid keeping Q positive on the sqrt(2) ring.

    Scans c downward from 1 by factors of 10^(-1/4) until the minimum of
    Q over ``n_probes`` ring probes is at least ``margin`` times the
    maximum gain term there.  The gain on this ring does not depend on c,
    so the criterion is a fixed target the loss term must stay under.
    """
    kern = kernel if kernel is not None else KernelSpec.square_singular()
    ang = 2.0 * np.pi * np.arange(n_probes) / n_probes
    probes = SQRT2 * np.stack((np.cos(ang), np.sin(ang)), axis=-1)
    c = 1.0
    while c > C_GRID_FLOOR:
        prof = build_counterexample(
            CounterexampleParams(a=a, rho=rho, c=c, floor_delta=floor_delta,
                                 r_domain=r_domain), smoothing_width)
        q = quad if quad is not None else quadrature_for_profile(prof)
        if kern.is_singular:
            t = singular_terms(prof, probes, q, kern.weight, need_logs=False)
        else:
            t = mollified_terms(prof, probes, kern, q, need_logs=False)
        if float(np.min(t.q)) >= margin * float(np.max(t.gain)):
            return c
        c *= C_GRID_RATIO
    raise NumericalError(
        "no c in (1e-8, 1] makes Q positive on the sqrt(2) ring; the gain "
        "there is c-independent, so this indicates a broken operator")


@dataclass
class ScalingFit:
    """Least-squares power-law fit in log space."""

    exponent_p: float
    log_correction_used: bool
    amplitude: float
    residual: float
    log_coefficient: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def fit_scaling(samples: Sequence, with_log: bool = False) -> ScalingFit:
    """Fit log(value) against {1, log a} and optionally log(log a).

    The residual is the degree-of-freedom adjusted root-mean-square in
    log space, so the extra regressor must earn its keep.
    """
    pts = [(float(a), float(v)) for a, v in samples]
    _require(len(pts) >= 3, "at least 3 samples")
    a = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    _require(bool(np.all(a > 1.0)), "sample abscissae > 1")
    if np.any(v <= 0):
        raise ConfigError("fit_scaling requires positive values")
    x = np.log(a)
    y = np.log(v)
    cols = [np.ones_like(x), x]
    if with_log:
        cols.append(np.log(x))
    M = np.stack(cols, axis=1)
    beta, *_ = np.linalg.lstsq(M, y, rcond=None)
    ssr = float(np.sum((y - M @ beta) ** 2))
    df = max(1, len(pts) - M.shape[1])
    return ScalingFit(
        exponent_p=float(beta[1]),
        log_correction_used=with_log,
        amplitude=float(math.exp(beta[0])),
        residual=math.sqrt(ssr / df),
        log_coefficient=float(beta[2]) if with_log else 0.0,
    )


def compare_scaling(samples: Sequence) -> dict:
    """Both fits plus the preference verdict.

    The log-corrected model is preferred when it has strictly smaller
    adjusted residual *and* its log coefficient is positive (a negative
    coefficient is curvature of the opposite kind, not a log factor).
    """
    plain = fit_scaling(samples, with_log=False)
    logged = fit_scaling(samples, with_log=True)
    preferred = (logged.residual < plain.residual
                 and logged.log_coefficient > 0.0)
    return {"pure_power": plain.to_json(), "log_corrected": logged.to_json(),
            "log_model_preferred": preferred}


# ---------------------------------------------------------------------------
# Config ingestion.


def _load_config(config) -> dict:
    if isinstance(config, (str, Path)):
        try:
            with open(config) as fh:
                return json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config}:{e.lineno}: {e.msg}") from e
        except OSError as e:
            raise ConfigError(str(e)) from e
    if isinstance(config, dict):
        return config
    raise ConfigError("config must be a path or a JSON object")


def _build_kernel(obj) -> KernelSpec:
    if obj is None:
        return KernelSpec.square_singular()
    return KernelSpec.from_json(obj)


def _build_profile(obj, kernel: KernelSpec, quad_opts: dict):
    """Returns (evaluator, resolved profile config)."""
    if obj is None:
        raise ConfigError("config is missing the 'profile' section")
    kind = obj.get("kind", "counterexample")
    if kind == "gaussian":
        resolved = {"kind": "gaussian", "sigma": float(obj.get("sigma", 1.0))}
        return GaussianDensity(sigma=resolved["sigma"]), resolved
    if kind != "counterexample":
        raise ConfigError(f"unknown profile kind: {kind}")
    try:
        a = float(obj["a"])
    except KeyError as e:
        raise ConfigError("profile.a is required") from e
    rho = float(obj.get("rho", 0.1))
    delta = float(obj.get("floor_delta", 1e-6))
    r_domain = float(obj.get("r_domain", 8.0))
    s = float(obj.get("smoothing_width", 0.0))
    c = obj.get("c", "auto")
    if c == "auto":
        c = choose_c(a, rho=rho, floor_delta=delta, r_domain=r_domain,
                     kernel=kernel, smoothing_width=s)
    params = CounterexampleParams(a=a, rho=rho, c=float(c), floor_delta=delta,
                                  r_domain=r_domain)
    resolved = {"kind": "counterexample", "a": a, "rho": rho, "c": float(c),
                "floor_delta": delta, "r_domain": r_domain,
                "smoothing_width": s}
    return build_counterexample(params, s), resolved


def _build_quadrature(obj, profile, quad_scale: float = 1.0):
    obj = dict(obj or {})
    opts = {
        "n_sigma": int(obj.get("n_sigma", 16384)),
        "n_angular_outer": int(obj.get("n_angular_outer", 16)),
        "coarse_spacing": float(obj.get("coarse_spacing", 0.05)),
        "quad_scale": float(obj.get("quad_scale", 1.0)) * quad_scale,
    }
    if "fine_spacing" in obj and obj["fine_spacing"] is not None:
        opts["fine_spacing"] = float(obj["fine_spacing"])
    if getattr(profile, "params", None) is not None:
        quad = quadrature_for_profile(profile, **opts)
    else:
        r_max = float(obj.get("r_max", 8.0))
        opts.setdefault("fine_spacing", 0.01)
        quad = make_quadrature(r_max, critical_radii=(), **opts)
    resolved = dict(opts)
    resolved["resolved_n_sigma"] = quad.n_sigma
    resolved["n_radial_cells"] = int(quad.polar_radii.size - 1)
    return quad, resolved


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def run_diagnose(config, out_dir, quad_scale: float = 1.0,
                 check_regions: bool = False) -> dict:
    """Build a density and kernel from config, write report JSON and the
    per-region CSV.  Returns the report payload."""
    cfg = _load_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kernel = _build_kernel(cfg.get("kernel"))
    f, prof_echo = _build_profile(cfg.get("profile"), kernel, cfg)
    quad, quad_echo = _build_quadrature(cfg.get("quadrature"), f, quad_scale)
    if check_regions:
        report = region_report(f, quad, kernel)
    else:
        report = dt_entropy_production(f, quad, kernel)
    echo = {"profile": prof_echo, "kernel": kernel.to_json(),
            "quadrature": quad_echo, "seed": cfg.get("seed")}
    payload = report.to_json()
    payload["config"] = echo
    _write_json(out / "report.json", payload)
    report.write_region_csv(out / "regions.csv")
    return payload


@dataclass
class SweepConfig:
    """One diagnose per (kernel, a, delta) plus scaling fits."""

    a_values: tuple = DEFAULT_A_VALUES
    delta_values: tuple = DEFAULT_DELTA_VALUES
    kernels: tuple = (None,)          # None = singular default
    rho: float = 0.1
    c: object = "auto"                # number, or "auto" for choose_c per cell
    r_domain: float = 8.0
    smoothing_width: float = 0.0
    quadrature: dict = dc_field(default_factory=dict)
    threads: int = 1

    def __post_init__(self) -> None:
        _require(len(self.a_values) > 0 and len(self.delta_values) > 0,
                 "nonempty sweep value lists")
        _require(all(b > a for a, b in zip(self.a_values, self.a_values[1:])),
                 "a_values strictly increasing")

    @classmethod
    def from_json(cls, obj: dict) -> "SweepConfig":
        kernels = obj.get("kernels")
        if kernels is None:
            kernels = [obj.get("kernel")]
        return cls(
            a_values=tuple(float(a) for a in obj.get("a_values", DEFAULT_A_VALUES)),
            delta_values=tuple(float(d) for d in
                               obj.get("delta_values", DEFAULT_DELTA_VALUES)),
            kernels=tuple(kernels),
            rho=float(obj.get("rho", 0.1)),
            c=obj.get("c", "auto"),
            r_domain=float(obj.get("r_domain", 8.0)),
            smoothing_width=float(obj.get("smoothing_width", 0.0)),
            quadrature=dict(obj.get("quadrature", {})),
            threads=int(obj.get("threads", 1)),
        )


_SWEEP_COLUMNS = ("kernel", "a", "delta", "c", "entropy_h", "d_direct",
                  "d_symmetric", "term_neg", "term_pos",
                  "term_pos_ring_sqrt2", "term_neg_f_ge_1", "dtd_total",
                  "vacuum_neg", "vacuum_pos", "error")


def _sweep_cell(sweep: SweepConfig, kernel_obj, a: float, delta: float,
                quad_scale: float):
    kernel = _build_kernel(kernel_obj)
    kname = ("singular" if kernel.is_singular
             else f"mollified_{kernel.radial.eps_r:g}_{kernel.angular.eps_theta:g}")
    try:
        c = sweep.c
        if c == "auto":
            c = choose_c(a, rho=sweep.rho, floor_delta=delta,
                         r_domain=sweep.r_domain, kernel=kernel,
                         smoothing_width=sweep.smoothing_width)
        prof = build_counterexample(
            CounterexampleParams(a=a, rho=sweep.rho, c=float(c),
                                 floor_delta=delta, r_domain=sweep.r_domain),
            sweep.smoothing_width)
        quad, _ = _build_quadrature(sweep.quadrature, prof, quad_scale)
        rep = dt_entropy_production(prof, quad, kernel)
        ring = rep.region("ring_sqrt2")
        return {
            "kernel": kname, "a": a, "delta": delta, "c": float(c),
            "entropy_h": rep.entropy_h, "d_direct": rep.d_direct,
            "d_symmetric": rep.d_symmetric,
            "term_neg": rep.dtd_negative_term,
            "term_pos": rep.dtd_positive_term,
            "term_pos_ring_sqrt2": ring.pos_term,
            "term_neg_f_ge_1": rep.neg_term_f_ge_1,
            "dtd_total": rep.dtd_total,
            "vacuum_neg": rep.vacuum_neg_term,
            "vacuum_pos": rep.vacuum_pos_term,
            "error": "",
        }
    except Exception as e:  # per-cell failures land in the CSV, not fatal
        return {"kernel": kname, "a": a, "delta": delta, "c": "",
                "error": f"{type(e).__name__}: {e}"}


def run_sweep(config, out_dir, quad_scale: float = 1.0,
              threads: Optional[int] = None) -> dict:
    """Sweep (kernel, a, delta), write sweep.csv and scaling_fits.json."""
    cfg = _load_config(config) if not isinstance(config, SweepConfig) else None
    sweep = config if isinstance(config, SweepConfig) else SweepConfig.from_json(cfg)
    if threads is not None:
        sweep.threads = threads
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    cells = [(k, a, d) for k in sweep.kernels for a in sweep.a_values
             for d in sweep.delta_values]
    if sweep.threads > 1:
        with ThreadPoolExecutor(max_workers=sweep.threads) as pool:
            rows = list(pool.map(
                lambda cell: _sweep_cell(sweep, cell[0], cell[1], cell[2],
                                         quad_scale), cells))
    else:
        rows = [_sweep_cell(sweep, *cell, quad_scale) for cell in cells]

    echo = {"a_values": list(sweep.a_values),
            "delta_values": list(sweep.delta_values),
            "rho": sweep.rho, "c": sweep.c, "r_domain": sweep.r_domain,
            "smoothing_width": sweep.smoothing_width,
            "quadrature": sweep.quadrature, "quad_scale": quad_scale}
    csv_path = out / "sweep.csv"
    with open(csv_path, "w") as fh:
        fh.write("# config: " + json.dumps(echo, sort_keys=True) + "\n")
        fh.write(",".join(_SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(row.get(col, "")) for col in
                              _SWEEP_COLUMNS) + "\n")

    fits: dict = {"config": echo, "fits": {}}
    for kernel_obj in sweep.kernels:
        kernel = _build_kernel(kernel_obj)
        kname = ("singular" if kernel.is_singular
                 else f"mollified_{kernel.radial.eps_r:g}_{kernel.angular.eps_theta:g}")
        for delta in sweep.delta_values:
            good = [r for r in rows
                    if r["kernel"] == kname and r["delta"] == delta
                    and not r["error"]]
            if len(good) < 3:
                continue
            entry: dict = {}
            pos = [(r["a"], r["term_pos_ring_sqrt2"]) for r in good]
            neg = [(r["a"], -r["term_neg_f_ge_1"]) for r in good]
            if all(v > 0 for _, v in pos):
                entry["term_pos_ring_sqrt2"] = compare_scaling(pos)
            if all(v > 0 for _, v in neg):
                entry["neg_term_f_ge_1"] = compare_scaling(neg)
            crossover = next((r["a"] for r in good if r["dtd_total"] > 0.0),
                             None)
            entry["crossover_a_star"] = crossover
            entry["dtd_total_signs"] = [[r["a"], r["dtd_total"] > 0.0]
                                        for r in good]
            fits["fits"][f"{kname}_delta_{delta:g}"] = entry
    _write_json(out / "scaling_fits.json", fits)
    return {"rows": rows, "fits": fits}


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_evolve(config, out_dir, quad_scale: float = 1.0) -> TimeSeries:
    """Flow a configured density and write the time-series CSV."""
    cfg = _load_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kernel = _build_kernel(cfg.get("kernel"))
    if not kernel.is_singular:
        raise ConfigError("evolution supports the singular kernel only")
    f, prof_echo = _build_profile(cfg.get("profile"), kernel, cfg)
    quad, quad_echo = _build_quadrature(cfg.get("quadrature"), f, quad_scale)

    gobj = cfg.get("grid") or {}
    grid = GridSpec(half_extent=float(gobj.get("half_extent", 8.0)),
                    n_per_axis=int(gobj.get("n_per_axis", 401)))
    eobj = cfg.get("evolution") or {}
    dt = eobj.get("dt")
    evo = EvolutionConfig(
        quad=quad,
        n_steps=int(eobj.get("n_steps", 50)),
        sample_every=int(eobj.get("sample_every", 10)),
        dt=None if dt in (None, "auto") else float(dt),
        scheme=str(eobj.get("scheme", "heun")),
        positivity_floor=(None if eobj.get("positivity_floor") is None
                          else float(eobj["positivity_floor"])),
        kernel=kernel,
    )
    series = evolve(f, evo, grid=grid)
    series.config_echo = {
        "profile": prof_echo, "kernel": kernel.to_json(),
        "quadrature": quad_echo,
        "grid": {"half_extent": grid.half_extent, "n_per_axis": grid.n_per_axis},
        "evolution": {"n_steps": evo.n_steps, "sample_every": evo.sample_every,
                      "dt": dt if dt not in (None, "auto") else "auto",
                      "scheme": evo.scheme},
        "clamp_events": series.clamp_events,
    }
    series.to_csv(out / "timeseries.csv")
    return series
