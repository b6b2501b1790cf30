"""Tests for the Makarov and variance bounds."""

import numpy as np
import pytest

from rc_treatment_effects.config import BOX_3, BOX_4, DgpSpec, EstimatorConfig
from rc_treatment_effects.dgp import generate, true_f_delta_cdf, true_variance_moments
from rc_treatment_effects.estimation.base import EstimationError, GridFunction2D, Sample
from rc_treatment_effects.estimation.bounds import (
    ConditionalPartialCdf,
    VarianceMoments,
    estimate_partial_cdfs,
    estimate_ucvate_parts,
    estimate_variance_moments,
    frechet_bounds,
    makarov_bounds_avg,
    makarov_bounds_curve,
    makarov_bounds_uncond,
    variance_bound_check,
    variance_bounds,
    variance_decomposition,
)
from rc_treatment_effects.oracles import analytic_partial_cdfs

from .conftest import fast_config

Y_GRID = np.linspace(-25.0, 35.0, 301)


@pytest.fixture(scope="module")
def analytic_cdfs():
    return analytic_partial_cdfs(Y_GRID)


def test_partial_cdf_validates_shapes():
    with pytest.raises(EstimationError) as excinfo:
        ConditionalPartialCdf(np.array([0.0, 1.0]), np.array([0.5, 0.5]), np.zeros((2, 3)))
    assert excinfo.value.code == "grid_mismatch"
    with pytest.raises(EstimationError):
        ConditionalPartialCdf(np.array([1.0, 0.0]), np.array([1.0]), np.zeros(2))


def test_shifted_partial_cdf_pads_with_end_values():
    cdf = ConditionalPartialCdf(np.array([0.0, 1.0, 2.0]), np.array([1.0]), np.array([0.2, 0.6, 0.9]))
    np.testing.assert_allclose(cdf.shifted(1.0)[:, 0], [0.0, 0.2, 0.6])
    np.testing.assert_allclose(cdf.shifted(-5.0)[:, 0], [0.9, 0.9, 0.9])


def test_rearranged_partial_cdf_is_monotone_and_nonnegative():
    cdf = ConditionalPartialCdf(np.array([0.0, 1.0, 2.0]), np.array([1.0]), np.array([0.3, -0.1, 0.2]))
    np.testing.assert_allclose(cdf.rearranged().values[:, 0], [0.0, 0.2, 0.3])


def test_makarov_bounds_contain_truth(analytic_cdfs):
    g0, g1 = analytic_cdfs
    for delta in (-2.0, 0.0, 4.0, 8.0, 12.0):
        low, high = makarov_bounds_avg(g0, g1, delta)
        truth = true_f_delta_cdf(delta)
        assert low - 0.01 <= truth <= high + 0.01


def test_averaged_bounds_are_tighter_than_marginal_ones(analytic_cdfs):
    g0, g1 = analytic_cdfs
    frame = makarov_bounds_curve(g0, g1, np.linspace(-4.0, 12.0, 17))
    assert list(frame.columns) == ["delta", "low", "high", "uncond_low", "uncond_high"]
    assert (frame["low"] >= frame["uncond_low"] - 1e-9).all()
    assert (frame["high"] <= frame["uncond_high"] + 1e-9).all()
    assert (frame["low"] <= frame["high"]).all()


def test_makarov_bounds_far_in_the_upper_tail(analytic_cdfs):
    g0, g1 = analytic_cdfs
    low, high = makarov_bounds_avg(g0, g1, 70.0)
    assert low == pytest.approx(1.0, abs=0.02)
    assert high == 1.0


def test_makarov_bounds_for_identical_single_node():
    y = np.array([0.0, 1.0, 2.0])
    cdf = ConditionalPartialCdf(y, np.array([1.0]), np.array([0.0, 0.5, 1.0]))
    assert makarov_bounds_avg(cdf, cdf, 0.0) == (0.0, 1.0)
    assert makarov_bounds_uncond(y, cdf.marginal(), cdf.marginal(), 0.0) == (0.0, 1.0)


def test_makarov_bounds_need_matching_grids(analytic_cdfs):
    g0, _ = analytic_cdfs
    other = ConditionalPartialCdf(Y_GRID, np.ones(1), np.zeros(Y_GRID.size))
    with pytest.raises(EstimationError) as excinfo:
        makarov_bounds_avg(g0, other, 0.0)
    assert excinfo.value.code == "grid_mismatch"
    with pytest.raises(EstimationError):
        makarov_bounds_uncond(Y_GRID, np.zeros(3), np.zeros(Y_GRID.size), 0.0)


def test_frechet_bounds():
    assert frechet_bounds(0.3, 0.6) == (0.0, 0.3)
    low, high = frechet_bounds(0.8, 0.7)
    assert low == pytest.approx(0.5)
    assert high == 0.7
    with pytest.raises(EstimationError):
        frechet_bounds(1.2, 0.5)


def test_variance_check_flags_violation():
    check = variance_bound_check(VarianceMoments(ate=0.0, cross=0.0, m0=0.0, m1=0.0, var_delta=2.0))
    assert check.lhs == 4.0
    assert check.rhs == 0.0
    assert check.holds is False


def test_variance_check_holds_on_population_moments():
    moments = true_variance_moments()
    assert (moments.m0, moments.m1, moments.cross) == (9.25, 44.25, -53.5)
    check = variance_bound_check(moments)
    assert check.lhs == pytest.approx(870.25)
    assert check.rhs == pytest.approx(1637.25)
    assert check.holds is True


def test_variance_bounds_contain_population_variance():
    moments = true_variance_moments()
    low, high = variance_bounds(moments.m0, moments.m1, moments.ate)
    assert low == 0.0
    assert low <= moments.var_delta <= high
    with pytest.raises(EstimationError):
        variance_bounds(-1.0, 1.0, 0.0)


def test_estimated_partial_cdfs_are_monotone(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11))
    g0, g1 = estimate_partial_cdfs(small_sample, cfg, np.linspace(-10.0, 20.0, 41), gamma_grid=(5, 5))
    assert g0.compatible(g1)
    for cdf in (g0, g1):
        assert cdf.values.shape == (41, 25)
        assert np.all(np.diff(cdf.values, axis=0) >= 0.0)
        assert np.all(cdf.values >= 0.0)


def test_variance_moments_respect_supplied_variance(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11))
    moments = estimate_variance_moments(small_sample, cfg, var_delta=8.0)
    assert moments.var_delta == 8.0
    assert moments.m0 > 0.0
    assert moments.m1 > 0.0


def _box_grid(values) -> GridFunction2D:
    return GridFunction2D(BOX_4, np.asarray(values, dtype=float).reshape(5, 5))


def test_cross_fitted_spread():
    """Identical halves reproduce the squared spread; disagreeing halves lose their product of errors."""
    density = _box_grid(np.full(25, 0.1))
    ucate_f = _box_grid(0.1 * np.linspace(2.0, 6.0, 25))
    ucate = _box_grid(np.linspace(2.0, 6.0, 25))
    ucvate_f = _box_grid(np.full(25, 0.1))
    squared = variance_decomposition(ucvate_f, ucate, density, 0.4, BOX_4)
    same = variance_decomposition(ucvate_f, ucate, density, 0.4, BOX_4, ucate_times_f_folds=(ucate_f, ucate_f))
    assert same == pytest.approx(squared, rel=1e-12)
    shift = _box_grid(np.full(25, 0.05))
    apart = variance_decomposition(
        ucvate_f,
        ucate,
        density,
        0.4,
        BOX_4,
        ucate_times_f_folds=(ucate_f.map(lambda v: v + shift.values), ucate_f.map(lambda v: v - shift.values)),
    )
    # (a + e)(a - e) / f = a^2 / f - e^2 / f, with e^2 / f = 0.025 over an area of 9
    assert apart == pytest.approx(squared - 0.225, rel=1e-9)


def test_ucvate_needs_both_arms_in_each_half():
    sample = generate(DgpSpec(n=40, seed=1))
    d = np.zeros(sample.n, dtype=np.int8)
    d[1::2] = 1
    split = Sample(y=sample.y, d=d, phi_angle=sample.phi_angle, v=sample.v)
    with pytest.raises(EstimationError) as excinfo:
        estimate_ucvate_parts(split, EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11)))
    assert excinfo.value.code == "no_treatment_variation"


def _weighted_mean_on_box(parts, box) -> float:
    return float(parts.ucvate_times_f.integrate(box)) / float(parts.density.integrate(box))


@pytest.mark.slow
def test_variance_decomposition_on_independent_design(independent_sample):
    parts = estimate_ucvate_parts(independent_sample, fast_config())
    assert 5.0 <= parts.variance(BOX_3) <= 7.0
    assert _weighted_mean_on_box(parts, BOX_4) == pytest.approx(1.0, abs=0.4)


@pytest.mark.slow
def test_constant_effect_has_no_conditional_variance():
    sample = generate(DgpSpec(variant="constant_delta", n=20000, seed=5))
    parts = estimate_ucvate_parts(sample, fast_config())
    assert abs(_weighted_mean_on_box(parts, BOX_4)) <= 0.3
    assert abs(parts.variance(BOX_3)) <= 0.3
