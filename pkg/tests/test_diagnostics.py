import json
import math

import numpy as np
import pytest

from boltzlab import (AnnulusDecomposition, ConfigError, CounterexampleParams,
                      KernelSpec, NumericalError, RadialStepProfile,
                      RegionMapError, build_counterexample, default_regions,
                      dt_entropy_production, entropy, entropy_production_direct,
                      entropy_production_symmetric, l_potential, region_report,
                      make_quadrature, quadrature_for_profile)
from boltzlab.diagnostics import Region, symmetric_production_detail
from conftest import random_positive_profile
from oracles import exact_circle_means, gaussian_truncated_entropy

SQRT5 = math.sqrt(5.0)

# Exact value at (1, 1) for a = 100, rho = 0.1, c = 1, delta = 1e-6.
L_POT_11_A100 = 2087.781210348


def closed_form_entropy(a, rho, c):
    return -math.pi * (rho**2 * c * a**2 * math.log(c * a**2)
                       + 4 * SQRT5 * rho * a * math.log(a))


def test_entropy_flat_disk_is_zero():
    prof = RadialStepProfile(breakpoints=np.array([5.0, 8.0]),
                             values=np.array([1.0, 0.0]))
    quad = quadrature_for_profile(prof, n_sigma=256)
    assert entropy(prof, quad) == pytest.approx(0.0, abs=1e-12)


def test_entropy_counterexample_closed_form():
    params = CounterexampleParams(a=100.0, rho=0.1, c=1.0, floor_delta=0.0)
    prof = build_counterexample(params)
    quad = quadrature_for_profile(prof, n_sigma=256)
    expected = closed_form_entropy(100.0, 0.1, 1.0)
    # breakpoints are cell edges, so the rule is exact for step profiles
    assert entropy(prof, quad) == pytest.approx(expected, rel=1e-12)


def test_entropy_gaussian_truncated(gauss, quad_gauss):
    assert entropy(gauss, quad_gauss) == pytest.approx(
        gaussian_truncated_entropy(8.0), abs=1e-6)


def test_gaussian_production_vanishes(gauss, quad_gauss):
    assert abs(entropy_production_direct(gauss, quad_gauss)) <= 1e-6
    val, smin = symmetric_production_detail(gauss, quad_gauss)
    assert abs(val) <= 1e-6
    assert smin >= -1e-12
    rep = dt_entropy_production(gauss, quad_gauss)
    assert abs(rep.dtd_negative_term) <= 1e-6
    assert abs(rep.dtd_positive_term) <= 1e-6


def test_constant_density_production_vanishes():
    prof = RadialStepProfile(breakpoints=np.array([20.0]),
                             values=np.array([2.0]), floor_delta=2.0)
    quad = make_quadrature(8.0, n_sigma=256, fine_spacing=0.5,
                           coarse_spacing=0.5)
    assert abs(entropy_production_direct(prof, quad)) <= 1e-10
    assert abs(entropy_production_symmetric(prof, quad)) <= 1e-10
    assert abs(l_potential(prof, (1.0, 0.5), quad)) <= 1e-12


def test_direct_form_requires_positive_density():
    prof = build_counterexample(
        CounterexampleParams(a=10.0, c=0.5, floor_delta=0.0))
    quad = quadrature_for_profile(prof, n_sigma=256)
    with pytest.raises(NumericalError):
        entropy_production_direct(prof, quad)


def test_form_equivalence_counterexample(prof100, quad100):
    d1 = entropy_production_direct(prof100, quad100)
    d2 = entropy_production_symmetric(prof100, quad100)
    assert d1 == pytest.approx(d2, rel=0.01)
    assert d1 > 0


def test_symmetric_samples_nonnegative_random_profiles():
    rng = np.random.default_rng(20240817)
    for _ in range(8):
        prof = random_positive_profile(rng)
        quad = quadrature_for_profile(prof, n_sigma=512, coarse_spacing=0.1)
        val, smin = symmetric_production_detail(prof, quad)
        assert smin >= 0.0
        assert val >= -1e-8 * max(abs(val), 1.0)


def test_l_potential_against_oracle(prof100, quad100):
    ex = exact_circle_means(prof100, (1.0, 1.0))
    assert ex["l_pot"] == pytest.approx(L_POT_11_A100, rel=1e-9)
    assert l_potential(prof100, (1.0, 1.0), quad100) == \
        pytest.approx(ex["l_pot"], rel=1e-2)
    # bare circle-integral units reach a^2 on the sqrt(2) ring
    assert 2 * math.pi * ex["l_pot"] > 100.0**2


def test_l_potential_gaussian_zero(gauss, quad_gauss):
    assert abs(l_potential(gauss, (1.0, 1.0), quad_gauss)) <= 1e-10


def test_report_structure(prof100, quad100):
    rep = dt_entropy_production(prof100, quad100)
    assert rep.dtd_total == rep.dtd_negative_term + rep.dtd_positive_term
    assert rep.dtd_negative_term <= 0.0
    neg_sum = sum(row.neg_term for row in rep.per_region)
    pos_sum = sum(row.pos_term for row in rep.per_region)
    assert neg_sum == pytest.approx(rep.dtd_negative_term, rel=1e-10)
    assert pos_sum == pytest.approx(rep.dtd_positive_term, rel=1e-10)
    names = [row.name for row in rep.per_region]
    assert names == ["inner_ball", "ring_1", "ring_sqrt2", "ring_sqrt5",
                     "ring_2sqrt2", "bulk", "vacuum"]
    assert rep.floor_delta == 1e-6
    assert rep.quadrature["n_sigma"] == quad100.n_sigma
    blob = json.dumps(rep.to_json(), sort_keys=True)
    assert "ring_sqrt2" in blob


def test_report_csv(tmp_path, prof100, quad100):
    rep = dt_entropy_production(prof100, quad100)
    path = tmp_path / "regions.csv"
    rep.write_region_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ("region,r_lo,r_hi,max_qplus,max_qminus,max_l,"
                        "share_neg_term,share_pos_term")
    assert len(lines) == 1 + len(rep.per_region)


def test_region_report_map_passes(prof100, quad100):
    rep = region_report(prof100, quad100)
    ring = rep.region("ring_sqrt2")
    bare = 2 * math.pi
    assert ring.max_qplus * bare >= 100.0**2 / 10
    assert ring.max_l * bare >= 100.0**2
    assert rep.region("bulk").max_qplus * bare < 100.0**2 / 10


def test_region_report_guard_fails_featureless():
    prof = build_counterexample(
        CounterexampleParams(a=1.001, c=1.0, floor_delta=1e-6))
    quad = quadrature_for_profile(prof, n_sigma=1024)
    with pytest.raises(RegionMapError):
        region_report(prof, quad)


def test_region_report_weight_invariance(prof100):
    # the qualitative map is stated in bare circle-integral units, so the
    # verdict cannot depend on the kernel weight
    quad = quadrature_for_profile(prof100, n_sigma=4096)
    for W in (1.0, 2 * math.pi):
        rep = region_report(prof100, quad, KernelSpec.square_singular(W))
        assert rep.region("ring_sqrt2").max_qplus > 0


def test_regions_cover_and_classify():
    regs = default_regions(0.1, 8.0)
    assert regs.r_domain == 8.0
    edges = regs.edges()
    assert edges[0] == 0.0 and edges[-1] == 8.0
    radii = np.array([0.05, 0.95, 1.45, 2.1, 2.85, 4.0, 6.5])
    names = [regs.regions[i].name for i in regs.classify(radii)]
    assert names == ["inner_ball", "ring_1", "ring_sqrt2", "ring_sqrt5",
                     "ring_2sqrt2", "bulk", "vacuum"]
    with pytest.raises(ConfigError):
        default_regions(0.2, 8.0)   # source ring would overlap 2 sqrt(2) ring
    with pytest.raises(ConfigError):
        AnnulusDecomposition((Region("a", ((0.0, 1.0),)),
                              Region("b", ((2.0, 3.0),))))   # gap


def test_vacuum_reported_separately(prof100, quad100):
    rep = dt_entropy_production(prof100, quad100)
    vac = rep.region("vacuum")
    assert rep.vacuum_neg_term == pytest.approx(vac.neg_term)
    assert rep.vacuum_pos_term == pytest.approx(vac.pos_term)
    # the floor-dependent vacuum term is excluded from the f >= 1 restriction
    assert rep.neg_term_f_ge_1 == pytest.approx(
        rep.dtd_negative_term - vac.neg_term, rel=1e-6)
