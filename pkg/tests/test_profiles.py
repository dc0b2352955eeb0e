import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boltzlab import (ConfigError, CounterexampleParams, GridSpec,
                      RadialStepProfile, ScalarGridField, Velocity,
                      build_counterexample, counterexample_from_json,
                      counterexample_to_json, eval_profile,
                      field_from_function, grid_interpolate, profile_to_grid)
from oracles import counterexample_mass_closed_form, mass_2d_quadrature

SQRT5 = math.sqrt(5.0)


def test_counterexample_values():
    prof = build_counterexample(
        CounterexampleParams(a=10.0, rho=0.1, c=0.01, floor_delta=0.0))
    assert eval_profile(prof, (0.05, 0.0)) == pytest.approx(1.0)     # c a^2
    assert eval_profile(prof, (SQRT5, 0.0)) == pytest.approx(10.0)   # ring
    assert eval_profile(prof, (3.0, 0.0)) == pytest.approx(1.0)
    assert eval_profile(prof, (6.0, 0.0)) == 0.0


def test_counterexample_floor_applied():
    prof = build_counterexample(
        CounterexampleParams(a=10.0, rho=0.1, c=0.01, floor_delta=1e-6))
    assert eval_profile(prof, (6.0, 0.0)) == pytest.approx(1e-6)
    # beyond the domain disk the floor still applies
    assert eval_profile(prof, (9.0, 0.0)) == pytest.approx(1e-6)


def test_step_profile_examples():
    prof = RadialStepProfile(breakpoints=np.array([1.0, 2.0]),
                             values=np.array([3.0, 7.0]))
    assert prof.eval_radii(0.5) == 3.0
    assert prof.eval_radii(1.0) == 3.0            # tie goes to the inner annulus
    assert prof.eval_radii(1.0000001) == 7.0
    smooth = prof.smoothed(0.1)
    assert smooth.eval_radii(1.0) == pytest.approx(5.0)   # ramp midpoint
    assert smooth.eval_radii(0.85) == 3.0
    assert smooth.eval_radii(1.15) == 7.0


def test_smoothing_monotone_and_c1ish():
    prof = RadialStepProfile(breakpoints=np.array([1.0, 8.0]),
                             values=np.array([1.0, 4.0]),
                             smoothing_width=0.2)
    r = np.linspace(0.7, 1.3, 400)
    vals = prof.eval_radii(r)
    assert np.all(np.diff(vals) >= -1e-14)
    # derivative vanishes at ramp ends
    h = 1e-6
    for edge in (0.8, 1.2):
        slope = (prof.eval_radii(edge + h) - prof.eval_radii(edge - h)) / (2 * h)
        assert abs(slope) < 1e-4


def test_smoothing_converges_pointwise():
    params = CounterexampleParams(a=10.0, c=0.5, floor_delta=0.0)
    sharp = build_counterexample(params)
    probes = np.array([0.05, 0.5, 1.7, SQRT5, 3.9, 6.0])
    prev = np.inf
    for s in (1e-2, 1e-3):
        smooth = build_counterexample(params, smoothing_width=s)
        dev = float(np.max(np.abs(smooth.eval_radii(probes)
                                  - sharp.eval_radii(probes))))
        assert dev <= prev
        prev = dev
    assert prev == 0.0  # probes sit away from every ramp at s = 1e-3


def test_mass_closed_form_and_quadrature():
    params = CounterexampleParams(a=10.0, rho=0.1, c=0.01, floor_delta=0.0)
    prof = build_counterexample(params)
    closed = counterexample_mass_closed_form(10.0, 0.1, 0.01)
    assert prof.mass() == pytest.approx(closed, rel=1e-12)
    assert mass_2d_quadrature(prof, 8.0) == pytest.approx(closed, rel=1e-2)


def test_mass_smoothed_matches_radial_quadrature():
    prof = build_counterexample(
        CounterexampleParams(a=10.0, c=0.5, floor_delta=1e-6),
        smoothing_width=0.03)
    r = np.linspace(0.0, prof.r_domain, 2_000_001)
    dense = float(np.trapezoid(prof.eval_radii(r) * 2 * np.pi * r, r))
    assert prof.mass() == pytest.approx(dense, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 9.0), st.floats(0.0, 2 * math.pi))
def test_nonnegative_and_radial(radius, angle):
    prof = build_counterexample(
        CounterexampleParams(a=50.0, c=0.3, floor_delta=1e-6))
    v = np.array([radius * math.cos(angle), radius * math.sin(angle)])
    val = float(prof(v))
    assert val >= 1e-6
    # radial symmetry is exact: evaluation only sees |v|
    assert val == float(prof.eval_radii(np.hypot(v[0], v[1])))


def test_param_validation():
    with pytest.raises(ConfigError):
        CounterexampleParams(a=10.0, rho=0.3)           # rho cap
    with pytest.raises(ConfigError):
        CounterexampleParams(a=10.0, floor_delta=1.5)   # floor < 1
    with pytest.raises(ConfigError):
        CounterexampleParams(a=10.0, r_domain=6.0)      # collision margin
    with pytest.raises(ConfigError):
        CounterexampleParams(a=-1.0)
    with pytest.raises(ConfigError):
        Velocity(float("nan"), 0.0)
    with pytest.raises(ConfigError):
        RadialStepProfile(breakpoints=np.array([2.0, 1.0]),
                          values=np.array([1.0, 1.0]))
    with pytest.raises(ConfigError):
        RadialStepProfile(breakpoints=np.array([1.0, 2.0]),
                          values=np.array([1.0, -1.0]))
    with pytest.raises(ConfigError):
        RadialStepProfile(breakpoints=np.array([1.0, 1.5]),
                          values=np.array([1.0, 2.0]), smoothing_width=0.3)


def test_profile_to_grid_examples():
    params = CounterexampleParams(a=10.0, rho=0.1, c=0.01, floor_delta=1e-6,
                                  r_domain=7.0)
    prof = build_counterexample(params)
    spec = GridSpec(7.0, 701)      # spacing 0.02 = rho/5
    field = profile_to_grid(prof, spec)
    ax = spec.axis()
    i0 = np.argmin(np.abs(ax))
    assert field.values[i0, i0] == pytest.approx(0.01 * 100.0)
    i6 = np.argmin(np.abs(ax - 6.0))
    assert field.values[i6, i0] == pytest.approx(1e-6)
    # 8-fold symmetry holds exactly
    assert np.array_equal(field.values, field.values.T)
    assert np.array_equal(field.values, field.values[::-1, :])


def test_profile_to_grid_rejects_coarse():
    prof = build_counterexample(CounterexampleParams(a=10.0, c=0.01))
    with pytest.raises(ConfigError):
        profile_to_grid(prof, GridSpec(8.0, 201))
    # smoothed ramps relax the limit to 2 * smoothing_width
    smooth = build_counterexample(CounterexampleParams(a=10.0, c=0.01),
                                  smoothing_width=0.02)
    field = profile_to_grid(smooth, GridSpec(8.0, 401))   # spacing 0.04
    assert field.values.shape == (401, 401)
    with pytest.raises(ConfigError):
        profile_to_grid(prof, GridSpec(7.0, 401))         # half_extent < r_domain


def test_grid_interpolate():
    spec = GridSpec(1.0, 3)
    vals = np.array([[0.0, 0.0, 1.0],
                     [0.0, 2.0, 1.0],
                     [2.0, 2.0, 1.0]])
    field = ScalarGridField(spec, vals, floor_delta=0.5)
    ax = spec.axis()
    for i in range(3):
        for j in range(3):
            assert grid_interpolate(field, (ax[i], ax[j])) == vals[i, j]
    # cell centre of the lower-left cell: corners {0, 0, 0, 2}
    assert grid_interpolate(field, (-0.5, -0.5)) == pytest.approx(0.5)
    # corners {0, 0, 2, 2} average to 1
    assert grid_interpolate(field, (-0.5, 0.0)) == pytest.approx(1.0)
    # constant sub-cell reproduces the constant
    const = ScalarGridField(spec, np.ones((3, 3)))
    assert grid_interpolate(const, (0.21, -0.37)) == pytest.approx(1.0)
    # out of extent falls back to the floor
    assert grid_interpolate(field, (2.0, 0.0)) == pytest.approx(0.5)


def test_field_roundtrips(tmp_path):
    spec = GridSpec(2.0, 5)
    field = field_from_function(spec, lambda p: 1.0 + p[..., 0] ** 2,
                                floor_delta=0.1)
    bin_path = tmp_path / "field.bin"
    field.to_binary(bin_path)
    back = ScalarGridField.from_binary(bin_path, 2.0, floor_delta=0.1)
    assert np.array_equal(back.values, field.values)
    raw = bin_path.read_bytes()
    assert len(raw) == 16 + 8 * 25
    assert np.frombuffer(raw[:16], dtype="<i8").tolist() == [5, 5]

    csv_path = tmp_path / "field.csv"
    field.to_csv(csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 1 + 25


def test_counterexample_json_roundtrip():
    prof = build_counterexample(
        CounterexampleParams(a=30.0, c=0.2, floor_delta=1e-5),
        smoothing_width=0.01)
    blob = json.dumps(counterexample_to_json(prof))
    back = counterexample_from_json(blob)
    assert back.params == prof.params
    assert back.smoothing_width == prof.smoothing_width
    r = np.linspace(0, 8, 1000)
    assert np.array_equal(back.eval_radii(r), prof.eval_radii(r))
