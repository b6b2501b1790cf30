"""Tests for hemisphere geometry and the Radon-inverse operators."""

import math

import numpy as np
import pytest
from scipy import special

from rc_treatment_effects.estimation.base import EstimationError
from rc_treatment_effects.estimation.radon import (
    HemispherePoint,
    HplaneFunction,
    QuadratureGrid,
    RadonInverse,
    apply_AT,
    apply_BT,
    gaussian_radon_function,
    radon_gaussian,
    simpson_weights,
)
from rc_treatment_effects.oracles import radon_inversion_error

MU = np.array([1.0, -0.5])
NORMAL_AT_ZERO = 1.0 / math.sqrt(2.0 * math.pi)


def test_hemisphere_point_rejects_boundary():
    with pytest.raises(EstimationError):
        HemispherePoint(0.0)
    with pytest.raises(EstimationError):
        HemispherePoint(math.pi)
    point = HemispherePoint.from_vector(np.array([0.0, 2.0]))
    assert point.angle == pytest.approx(math.pi / 2)


def test_radon_gaussian_examples():
    assert radon_gaussian(np.zeros(2), np.eye(2), HemispherePoint(math.pi / 2), 0.0) == pytest.approx(
        NORMAL_AT_ZERO, abs=1e-12
    )
    assert radon_gaussian(MU, np.eye(2), HemispherePoint(math.pi / 2), -0.5) == pytest.approx(
        NORMAL_AT_ZERO, abs=1e-12
    )
    assert radon_gaussian(MU, np.eye(2), HemispherePoint(1e-7), 1.0) == pytest.approx(NORMAL_AT_ZERO, abs=1e-6)


def test_radon_gaussian_rejects_singular_covariance():
    with pytest.raises(EstimationError) as excinfo:
        radon_gaussian(MU, np.array([[1.0, 1.0], [1.0, 1.0]]), HemispherePoint(1.0), 0.0)
    assert excinfo.value.code == "invalid_covariance"


def test_gaussian_radon_function_matches_pointwise():
    fn = gaussian_radon_function(MU, np.array([[1.0, 0.3], [0.3, 2.0]]))
    point = HemispherePoint(0.7)
    expected = radon_gaussian(MU, np.array([[1.0, 0.3], [0.3, 2.0]]), point, 0.4)
    assert fn.evaluate(point, 0.4) == pytest.approx(expected, rel=1e-12)


def test_simpson_weights_integrate_cubic_exactly():
    weights = simpson_weights(21, -1.0, 2.0)
    x = np.linspace(-1.0, 2.0, 21)
    assert weights @ x**3 == pytest.approx((16.0 - 1.0) / 4.0, rel=1e-12)
    with pytest.raises(EstimationError):
        simpson_weights(2, 0.0, 1.0)


def test_apply_of_zero_function_is_zero():
    assert apply_AT(HplaneFunction.zero(), 6.0, np.array([0.3, 0.2]), QuadratureGrid(n_phi=31, n_u=61)) == 0.0


def test_operator_rejects_other_dimensions():
    with pytest.raises(EstimationError) as excinfo:
        RadonInverse(QuadratureGrid(n_phi=31, n_u=61), 6.0, L=3)
    assert excinfo.value.code == "unsupported_dimension"


def test_operator_is_linear():
    grid = QuadratureGrid.covering(1.2, n_phi=41, n_u=81)
    op = RadonInverse(grid, 6.0)
    f = grid.sample(gaussian_radon_function(MU, np.eye(2)))
    g = grid.sample(gaussian_radon_function(np.array([-0.5, 0.5]), np.array([[2.0, 0.4], [0.4, 1.0]])))
    gammas = np.random.default_rng(1).uniform(-2.0, 2.0, (10, 2))
    combined = op.apply(2.5 * f - 0.7 * g, gammas)
    separate = 2.5 * op.apply(f, gammas) - 0.7 * op.apply(g, gammas)
    np.testing.assert_allclose(combined, separate, rtol=1e-10, atol=1e-12)


def test_apply_recovers_gaussian_density_at_mode():
    grid = QuadratureGrid.covering(float(np.linalg.norm(MU)), n_phi=241, n_u=481)
    value = apply_AT(gaussian_radon_function(MU, np.eye(2)), 12.0, MU, grid)
    assert value == pytest.approx(1.0 / (2.0 * math.pi), abs=0.01)


def test_integrated_weights_match_weighted_apply():
    grid = QuadratureGrid.covering(1.2, n_phi=31, n_u=61)
    op = RadonInverse(grid, 4.0)
    values = grid.sample(gaussian_radon_function(MU, np.eye(2)))
    gammas = np.array([[0.0, 0.0], [1.0, -0.5], [2.0, 1.0]])
    weights = np.array([0.2, 0.5, 0.3])
    assert op.integrated_weights(gammas, weights) @ values == pytest.approx(
        weights @ op.apply(values, gammas), rel=1e-10
    )


def _gaussian_cdf_in_u(phi, u):
    mean = np.cos(phi) * MU[0] + np.sin(phi) * MU[1]
    return special.ndtr(u - mean)


def test_apply_bt_equals_apply_at_of_u_derivative():
    grid = QuadratureGrid.covering(float(np.linalg.norm(MU)), n_phi=121, n_u=1281, margin=30.0)
    gamma = np.array([0.8, -0.3])
    via_b = apply_BT(HplaneFunction(_gaussian_cdf_in_u), 6.0, gamma, grid)
    via_a = apply_AT(gaussian_radon_function(MU, np.eye(2)), 6.0, gamma, grid)
    assert via_b == pytest.approx(via_a, abs=1e-3)


def test_apply_bt_of_constant_is_nearly_zero():
    grid = QuadratureGrid.covering(1.0, n_phi=121, n_u=1281, margin=30.0)
    constant = HplaneFunction(lambda phi, u: np.ones(np.broadcast(phi, u).shape))
    assert abs(apply_BT(constant, 6.0, np.array([0.5, 0.2]), grid)) <= 1e-3


@pytest.mark.slow
def test_reconstruction_error_shrinks_with_cutoff():
    errors = [radon_inversion_error(T) for T in (3.0, 6.0, 12.0)]
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] <= 0.01
