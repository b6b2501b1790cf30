"""Tests for the pipeline and direct estimators and the effect summaries built on them."""

import math
from dataclasses import replace

import numpy as np
import pytest

from rc_treatment_effects.config import BOX_3, BOX_4, Box, EstimatorConfig, RegressionConfig
from rc_treatment_effects.dgp import true_density_gamma
from rc_treatment_effects.estimation.base import (
    EstimationError,
    GridFunction2D,
    Observation,
    Sample,
    Zeta,
    constant_one,
    fourier,
    identity,
    indicator_le,
    square,
)
from rc_treatment_effects.estimation.estimators import (
    RadonPipeline,
    direct_estimate,
    direct_estimate_grid,
    direct_estimate_x,
    estimate_ate,
    estimate_density,
    estimate_marginal_cdf_grid,
    estimate_partial_ft,
    estimate_partial_ft_grid,
    estimate_scalar_theta,
    estimate_tt,
    estimate_tut,
    estimate_ucate,
    estimate_ucate_parts,
    grid_nodes,
    integration_domain,
    invert_cdf,
    masked_ratio,
    pipeline_estimate,
    qte,
    rearrange_cdf,
    stratified_estimate,
    tt_weight,
    tut_weight,
)
from rc_treatment_effects.estimation.kernels import kernel_table

MODE = (1.0, -0.5)


def _mode_index(grid: GridFunction2D):
    return int(np.argmin(np.abs(grid.gamma - MODE[0]))), int(np.argmin(np.abs(grid.theta - MODE[1])))


# -- samples and grids ------------------------------------------------------


def test_observation_validation():
    with pytest.raises(EstimationError) as excinfo:
        Observation(y=0.0, d=2, phi_angle=1.0, v=0.0)
    assert excinfo.value.code == "invalid_sample"
    with pytest.raises(EstimationError):
        Observation(y=0.0, d=1, phi_angle=4.0, v=0.0)


def test_sample_roundtrips_through_observations_and_csv(tmp_path, small_sample):
    rebuilt = Sample.from_observations(list(small_sample.observations()))
    np.testing.assert_array_equal(rebuilt.y, small_sample.y)
    path = tmp_path / "sample.csv"
    small_sample.to_csv(path)
    loaded = Sample.read_csv(path)
    np.testing.assert_array_equal(loaded.d, small_sample.d)
    np.testing.assert_array_equal(loaded.v, small_sample.v)


def test_sample_restrict_rejects_empty_mask(small_sample):
    with pytest.raises(EstimationError) as excinfo:
        small_sample.restrict(np.zeros(small_sample.n, dtype=bool))
    assert excinfo.value.code == "empty_subsample"


def test_outcome_transforms_in_responses():
    sample = Sample(y=[-1.0, 0.5, 2.0], d=[1, 0, 1], phi_angle=[1.0, 1.5, 2.0], v=[0.0, 0.1, 0.2])
    np.testing.assert_array_equal(sample.responses(square, Zeta.ONE), [1.0, 0.25, 4.0])
    np.testing.assert_array_equal(sample.responses(indicator_le(0.5), Zeta.D), [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(sample.responses(identity, Zeta.TWO_D_MINUS_1), [-1.0, -0.5, 2.0])
    waves = sample.responses(fourier(0.7), Zeta.D_MINUS_1)
    np.testing.assert_allclose(np.abs(waves), [0.0, 1.0, 0.0])
    assert waves[1] == pytest.approx(-np.exp(0.35j))


def test_grid_function_integrates_constant_to_area():
    grid = GridFunction2D.from_function(BOX_3, (13, 13), lambda g, t: np.ones_like(g))
    assert grid.integrate() == pytest.approx(BOX_3.area, rel=1e-12)
    assert grid.integrate(BOX_4) == pytest.approx(BOX_4.area, rel=1e-12)
    with pytest.raises(EstimationError) as excinfo:
        grid.integrate(Box(-5.0, 0.0, -1.0, 1.0))
    assert excinfo.value.code == "grid_mismatch"


def test_grid_function_frame_marks_masked_nodes():
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, 0] = True
    grid = GridFunction2D(BOX_4, np.ones((3, 3)), mask)
    frame = grid.to_frame()
    assert list(frame.columns) == ["gamma", "theta", "value"]
    assert frame["value"].isna().sum() == 1
    assert grid.integrate() < BOX_4.area


# -- direct estimator -------------------------------------------------------


def test_direct_estimate_single_observation():
    sample = Sample(y=[2.0], d=[1], phi_angle=[math.pi / 2], v=[0.3])
    cfg = EstimatorConfig(tau=10.0, m_floor=0.5)
    value = direct_estimate(sample, identity, Zeta.D, cfg, (0.0, 0.0), density=1.0)
    table = kernel_table(cfg.L, cfg.psi, cfg.quad_points)
    assert value == pytest.approx(2.0 * float(table.Ktilde(cfg.T, np.array([-0.3]))[0]), rel=1e-12)


def test_direct_estimate_is_zero_for_untreated_part_of_treated_sample():
    sample = Sample(y=[1.0, 2.0], d=[1, 1], phi_angle=[1.0, 2.0], v=[0.0, 0.5])
    value = direct_estimate(sample, identity, Zeta.D_MINUS_1, EstimatorConfig(), (0.5, 0.5), density=1.0)
    assert value == 0.0


def test_direct_grid_matches_pointwise_estimate(small_sample):
    cfg = EstimatorConfig(box=BOX_4, grid_res=(5, 5), T=1.8)
    grid = direct_estimate_grid(small_sample, constant_one, Zeta.D, cfg)
    assert grid.values[2, 2] == pytest.approx(direct_estimate(small_sample, constant_one, Zeta.D, cfg, MODE), rel=1e-10)
    clamped = direct_estimate_grid(small_sample, constant_one, Zeta.D, cfg, clamp=True)
    np.testing.assert_array_equal(clamped.values, np.maximum(grid.values, 0.0))


def test_direct_estimate_x_with_flat_kernel_matches_direct(small_sample):
    rng = np.random.default_rng(4)
    sample = replace(small_sample, x=rng.normal(size=small_sample.n), _cache={})
    cfg = EstimatorConfig(T=1.8)
    flat = direct_estimate_x(
        sample, identity, Zeta.D, cfg, MODE, [0.0], [1.0], x_kernel=lambda z: np.ones_like(z)
    )
    assert flat == pytest.approx(direct_estimate(sample, identity, Zeta.D, cfg, MODE), rel=1e-12)


def test_direct_estimate_x_single_observation_weight():
    sample = Sample(y=[2.0], d=[1], phi_angle=[math.pi / 2], v=[0.3], x=[[0.5]])
    cfg = EstimatorConfig(tau=10.0, m_floor=0.5)
    weighted = direct_estimate_x(sample, identity, Zeta.D, cfg, (0.0, 0.0), [0.5], [1.0], density=1.0)
    plain = direct_estimate(sample, identity, Zeta.D, cfg, (0.0, 0.0), density=1.0)
    assert weighted == pytest.approx(plain / math.sqrt(2.0 * math.pi), rel=1e-12)


def test_direct_estimate_x_localises_on_covariate_cluster(small_sample):
    x = np.where(np.arange(small_sample.n) % 2 == 0, 0.0, 10.0)
    sample = replace(small_sample, x=x, _cache={})
    cfg = EstimatorConfig(T=1.8, tau=1e6, m_floor=1e-10, density_bandwidths=(0.2, 0.5))
    local = direct_estimate_x(sample, identity, Zeta.D, cfg, MODE, [0.0], [1.0])
    cluster = sample.restrict(x == 0.0)
    assert local == pytest.approx(direct_estimate(cluster, identity, Zeta.D, cfg, MODE), rel=0.05)


def test_direct_estimate_x_requires_covariates(small_sample):
    with pytest.raises(EstimationError) as excinfo:
        direct_estimate_x(small_sample, identity, Zeta.D, EstimatorConfig(), MODE, [0.0], [1.0])
    assert excinfo.value.code == "missing_covariates"


# -- pipeline -----------------------------------------------------------------


def test_pipeline_requires_treatment_variation():
    sample = Sample(y=[1.0, 2.0, 3.0], d=[1, 1, 1], phi_angle=[1.0, 1.5, 2.0], v=[0.0, 0.1, 0.2])
    with pytest.raises(EstimationError) as excinfo:
        estimate_density(sample)
    assert excinfo.value.code == "no_treatment_variation"


def test_density_estimate_is_nonnegative(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11))
    density = estimate_density(small_sample, cfg)
    assert density.shape == (11, 11)
    assert np.all(density.values >= 0.0)


def test_functional_reproduces_evaluate(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11))
    pipeline = RadonPipeline(small_sample, cfg)
    gammas = grid_nodes(BOX_4, (5, 5))
    responses = small_sample.responses(identity, Zeta.ONE)
    np.testing.assert_allclose(
        pipeline.functional(gammas) @ responses,
        pipeline.evaluate(responses, gammas),
        rtol=1e-9,
        atol=1e-12,
    )


def test_pipeline_estimate_matches_ucate_parts(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11))
    parts = estimate_ucate_parts(small_sample, cfg)
    numerator = pipeline_estimate(small_sample, identity, Zeta.ONE, cfg)
    np.testing.assert_allclose(numerator.values, parts.ucate_times_f.values, rtol=1e-9, atol=1e-12)
    np.testing.assert_array_equal(estimate_ucate(small_sample, cfg).mask, parts.ucate.mask)


def test_ate_is_linear_in_outcomes(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11))
    scaled = Sample(y=3.0 * small_sample.y, d=small_sample.d, phi_angle=small_sample.phi_angle, v=small_sample.v)
    base = estimate_ate(estimate_ucate_parts(small_sample, cfg).ucate_times_f)
    tripled = estimate_ate(estimate_ucate_parts(scaled, cfg).ucate_times_f)
    assert tripled == pytest.approx(3.0 * base, rel=1e-9, abs=1e-12)


def test_ucate_mask_follows_density_floor(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11), dens_floor=0.05)
    parts = estimate_ucate_parts(small_sample, cfg)
    np.testing.assert_array_equal(parts.ucate.mask, parts.density.values < 0.05)
    assert parts.dens_floor == 0.05


def test_masked_ratio_needs_an_unmasked_node():
    with pytest.raises(EstimationError) as excinfo:
        masked_ratio(np.ones(4), np.full(4, 0.01), 0.1)
    assert excinfo.value.code == "empty_unmasked_region"
    ratio, mask = masked_ratio(np.array([1.0, 2.0]), np.array([0.5, 0.01]), 0.1)
    assert ratio.tolist() == [2.0, 0.0]
    assert mask.tolist() == [False, True]


def test_tt_with_unit_weight_equals_ate(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11))
    numerator = estimate_ucate_parts(small_sample, cfg).ucate_times_f
    tt = estimate_tt(small_sample, numerator, weight=lambda nodes: np.ones(len(nodes)))
    assert tt == pytest.approx(estimate_ate(numerator), rel=1e-12)


def test_selection_weights_need_both_groups():
    treated = Sample(y=[1.0, 2.0], d=[1, 1], phi_angle=[1.0, 2.0], v=[0.0, 0.5])
    untreated = Sample(y=[1.0, 2.0], d=[0, 0], phi_angle=[1.0, 2.0], v=[0.0, 0.5])
    with pytest.raises(EstimationError) as excinfo:
        tt_weight(untreated)
    assert excinfo.value.code == "no_treated"
    with pytest.raises(EstimationError) as excinfo:
        tut_weight(treated)
    assert excinfo.value.code == "no_untreated"


def test_selection_weights_average_to_one(small_sample):
    nodes = np.random.default_rng(0).normal([1.0, -0.5], 1.0, (4000, 2))
    assert tt_weight(small_sample)(nodes).mean() == pytest.approx(1.0, abs=0.1)
    assert tut_weight(small_sample)(nodes).mean() == pytest.approx(1.0, abs=0.1)


def test_tt_and_tut_bracket_ate_on_truth():
    grid = GridFunction2D.from_function(
        BOX_3, (41, 41), lambda g, t: (2.0 + g - 2.0 * t) * true_density_gamma(g, t)
    )
    sample = Sample(
        y=np.zeros(2), d=[1, 0], phi_angle=[math.pi / 2, math.pi / 2], v=[0.0, -1.0]
    )
    ate = estimate_ate(grid)
    assert ate == pytest.approx(4.0, abs=0.1)
    assert estimate_tt(sample, grid) > ate > estimate_tut(sample, grid)


def test_integration_domain_brackets_mode():
    density = GridFunction2D.from_function(BOX_3, (25, 25), true_density_gamma)
    domain = integration_domain(density, 0.2)
    assert domain.g_lo < MODE[0] < domain.g_hi
    assert domain.t_lo < MODE[1] < domain.t_hi
    assert BOX_3.contains(domain)


# -- marginal distributions -------------------------------------------------


def test_rearrange_cdf_sorts_and_clips():
    np.testing.assert_array_equal(rearrange_cdf(np.array([0.2, -0.1, 1.3, 0.5])), [0.0, 0.2, 0.5, 1.0])


def test_invert_cdf_interpolates_and_flags():
    y = np.array([0.0, 1.0, 2.0, 3.0])
    cdf = np.array([0.0, 0.25, 0.75, 1.0])
    quantile = invert_cdf(y, cdf, 0.5)
    assert quantile.value == pytest.approx(1.5)
    assert quantile.flat is False
    assert invert_cdf(y, np.array([0.0, 0.1, 0.2, 0.3]), 0.5).flat is True


def test_qte_rejects_invalid_level(small_sample):
    with pytest.raises(EstimationError):
        qte(small_sample, EstimatorConfig(), 1.5)


def test_marginal_cdf_is_monotone(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61, grid_res=(11, 11))
    estimate = estimate_marginal_cdf_grid(small_sample, cfg, 1, np.linspace(-10.0, 20.0, 61))
    assert np.all(np.diff(estimate.cdf) >= 0.0)
    assert estimate.cdf.min() >= 0.0
    assert estimate.cdf.max() <= 1.0
    with pytest.raises(EstimationError):
        estimate_marginal_cdf_grid(small_sample, cfg, 2)


# -- scalar instrument and stratification ------------------------------------


def test_scalar_theta_needs_positive_denominator():
    rng = np.random.default_rng(0)
    v = rng.uniform(-3.0, 3.0, 500)
    sample = Sample(y=v, d=(v < 0).astype(int), phi_angle=np.full(500, math.pi / 2), v=v)
    with pytest.raises(EstimationError) as excinfo:
        estimate_scalar_theta(sample, RegressionConfig(), constant_one, 0.0)
    assert excinfo.value.code == "denominator_nonpositive"


@pytest.mark.slow
def test_scalar_theta_density_and_outcome(scalar_sample):
    density = estimate_scalar_theta(scalar_sample, RegressionConfig(), constant_one, 0.0)
    assert density == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=0.07)
    mean_y1 = estimate_scalar_theta(scalar_sample, RegressionConfig(), identity, 0.0)
    assert mean_y1 == pytest.approx(0.0, abs=0.1)


def test_stratified_estimate_with_single_stratum(small_sample):
    sample = replace(small_sample, b=np.ones(small_sample.n, dtype=int), _cache={})
    cfg = EstimatorConfig(T=1.8)
    stratified = stratified_estimate(sample, 1, direct_estimate, identity, Zeta.D, cfg, MODE)
    assert stratified == pytest.approx(direct_estimate(sample, identity, Zeta.D, cfg, MODE), rel=1e-12)
    with pytest.raises(EstimationError) as excinfo:
        stratified_estimate(sample, 0, direct_estimate, identity, Zeta.D, cfg, MODE)
    assert excinfo.value.code == "empty_subsample"


def test_stratified_estimate_requires_binary_instrument(small_sample):
    with pytest.raises(EstimationError):
        stratified_estimate(small_sample, 1, lambda s: s.n)


# -- partial Fourier transforms ---------------------------------------------


def test_partial_transform_at_zero_is_density(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61)
    value = estimate_partial_ft(small_sample, cfg, 0.0, np.array(MODE), "Y1_part")
    pipeline = RadonPipeline(small_sample, cfg)
    density = pipeline.evaluate(small_sample.d.astype(float), np.array([MODE]))[0]
    assert value.imag == 0.0
    assert value.real == pytest.approx(density, rel=1e-9, abs=1e-12)


def test_partial_transform_conjugate_symmetry(small_sample):
    cfg = EstimatorConfig(n_phi=31, n_u=61)
    values = estimate_partial_ft_grid(small_sample, cfg, np.array([-0.7, 0.7]), np.array([MODE]))
    for part in values.values():
        assert part[0, 0] == pytest.approx(np.conj(part[0, 1]), rel=1e-12, abs=1e-14)
    with pytest.raises(EstimationError):
        estimate_partial_ft_grid(small_sample, cfg, np.array([0.0]), np.array([MODE]), ("Y2_part",))


# -- statistical checks on the simulation design -----------------------------


@pytest.mark.slow
def test_density_estimate_mass_and_mode(baseline_sample, fast_cfg):
    density = estimate_density(baseline_sample, fast_cfg)
    assert 0.8 <= density.integrate() <= 1.1
    assert density.values[_mode_index(density)] == pytest.approx(1.0 / (2.0 * math.pi), abs=0.06)


@pytest.mark.slow
def test_ucate_times_density_and_ratio_at_mode(baseline_sample, fast_cfg):
    numerator_cfg = replace(fast_cfg, T=10.0, n_phi=81, n_u=161)
    density_cfg = replace(numerator_cfg, T=6.0)
    parts = estimate_ucate_parts(baseline_sample, numerator_cfg, density_cfg)
    index = _mode_index(parts.ucate)
    assert parts.ucate_times_f.values[index] == pytest.approx(4.0 / (2.0 * math.pi), abs=0.15)
    assert parts.ucate.values[index] == pytest.approx(4.0, abs=0.8)


@pytest.mark.slow
def test_constant_effect_gives_flat_ucate(constant_delta_sample, fast_cfg):
    parts = estimate_ucate_parts(constant_delta_sample, fast_cfg)
    central = parts.density.values >= 0.5 * parts.density.values.max()
    assert np.median(parts.ucate.values[central]) == pytest.approx(4.0, abs=0.3)


@pytest.mark.slow
def test_marginal_cdf_and_median_effect(baseline_sample, fast_cfg):
    y_grid = np.linspace(-15.0, 25.0, 201)
    estimate = estimate_marginal_cdf_grid(baseline_sample, fast_cfg, 1, y_grid)
    assert estimate.cdf[np.searchsorted(y_grid, 6.0)] == pytest.approx(0.5, abs=0.08)
    result = qte(baseline_sample, fast_cfg, 0.5, y_grid=y_grid)
    assert result.value == pytest.approx(4.0, abs=0.6)


@pytest.mark.slow
def test_partial_transform_modulus_at_mode(baseline_sample, fast_cfg):
    value = estimate_partial_ft(baseline_sample, fast_cfg, 0.5, np.array(MODE), "Y1_part")
    assert abs(value) == pytest.approx(math.exp(-0.25) / (2.0 * math.pi), abs=0.05)
