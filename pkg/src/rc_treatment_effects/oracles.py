"""Closed-form and quadrature reference values, written as ``golden.json``."""

from __future__ import annotations

import logging
from typing import Dict, Optional

import numpy as np

from .config import BOX_4, PLOT_BOX, Box, DeconvConfig
from .dgp import (
    true_density_gamma,
    true_f_delta_cdf,
    true_partial_cdf,
    true_propensity,
    true_treated_share,
    true_tt,
    true_tut,
    true_ucate,
    true_variance_moments,
)
from .estimation.bounds import ConditionalPartialCdf, makarov_bounds_avg, variance_bound_check, variance_bounds
from .estimation.deconv import oracle_deconv
from .estimation.estimators import box_quadrature, grid_nodes
from .estimation.radon import QuadratureGrid, RadonInverse, gaussian_radon_function
from .estimation.spherical import SpherePoint, coef_h, coef_lambda, gegenbauer, hemispherical_transform_quad, sphere_area
from .store import NullResultStore, ResultStore

LOGGER = logging.getLogger("rc_treatment_effects.oracles")

COEF_MU = np.array([1.0, -0.5])


def gaussian_cf(mean: float, var: float):
    return lambda t: np.exp(1j * mean * np.asarray(t) - 0.5 * var * np.asarray(t) ** 2)


def radon_inversion_error(T: float, *, n_phi: int = 241, n_u: int = 481, grid_res=(21, 21)) -> float:
    """Sup over a grid around the mode of |A_T[Radon of N(mu, I)] - N(mu, I) density|."""
    quad = QuadratureGrid.covering(float(np.linalg.norm(COEF_MU)), n_phi=n_phi, n_u=n_u)
    op = RadonInverse(quad, T)
    values = quad.sample(gaussian_radon_function(COEF_MU, np.eye(2)))
    nodes = grid_nodes(BOX_4, grid_res)
    estimate = op.apply(values, nodes)
    truth = true_density_gamma(nodes[:, 0], nodes[:, 1])
    return float(np.max(np.abs(estimate - truth)))


def _degree_one(points: np.ndarray) -> np.ndarray:
    return points[:, 2]


def _degree_three(points: np.ndarray) -> np.ndarray:
    z = points[:, 2]
    return 0.5 * (5.0 * z**3 - 3.0 * z)


def hemispherical_eigen_ratio(degree: int, resolution: int = 64) -> float:
    """H(Y)(s) / Y(s) for the zonal harmonic of the given odd degree at a generic s."""
    s = SpherePoint.normalized((0.3, -0.4, 0.8))
    fn = _degree_one if degree == 1 else _degree_three
    return hemispherical_transform_quad(fn, s, resolution) / float(fn(s.array[None, :])[0])


def analytic_partial_cdfs(y_grid: np.ndarray, grid_res=(41, 41), box: Box = PLOT_BOX, variant: str = "baseline"):
    """True G_0, G_1 on a trapezoid gamma-grid over ``box``."""
    nodes, weights = box_quadrature(box, grid_res)
    yy = np.asarray(y_grid, dtype=float)[:, None]
    g0 = true_partial_cdf(0, yy, nodes[None, :, 0], nodes[None, :, 1], variant)
    g1 = true_partial_cdf(1, yy, nodes[None, :, 0], nodes[None, :, 1], variant)
    return ConditionalPartialCdf(y_grid, weights, g0), ConditionalPartialCdf(y_grid, weights, g1)


def run_oracles(store: Optional[ResultStore] = None, *, include_radon: bool = True) -> Dict[str, float]:
    """Every reference value the test-suite and the acceptance runs compare against."""
    store = store or NullResultStore()
    golden: Dict[str, float] = {
        "density_at_mode": true_density_gamma(1.0, -0.5),
        "ucate_at_mode": true_ucate(1.0, -0.5),
        "propensity_at_projected_mean": true_propensity(np.array([0.0, 1.0]), -0.5),
        "treated_share": true_treated_share(),
        "tt": true_tt(),
        "tut": true_tut(),
        "coef_h_1_2": coef_h(1, 2),
        "coef_lambda_1_2": coef_lambda(1, 2),
        "coef_lambda_3_2": coef_lambda(3, 2),
        "sphere_area_2": sphere_area(2),
        "gegenbauer_2_half_1": gegenbauer(2, 0.5, 1.0),
        "hemispherical_eigen_1": hemispherical_eigen_ratio(1),
        "hemispherical_eigen_3": hemispherical_eigen_ratio(3),
    }
    deconv = DeconvConfig(R_delta=4.0, kernel="indicator")
    golden["deconv_gaussian_at_4"] = float(oracle_deconv(gaussian_cf(4.0, 4.0), gaussian_cf(0.0, 1.0), deconv, 4.0))

    moments = true_variance_moments()
    check = variance_bound_check(moments)
    golden.update(
        {
            "variance_m0": moments.m0,
            "variance_m1": moments.m1,
            "variance_cross": moments.cross,
            "variance_lhs": check.lhs,
            "variance_rhs": check.rhs,
        }
    )
    low, high = variance_bounds(moments.m0, moments.m1, moments.ate)
    golden["variance_bound_low"] = low
    golden["variance_bound_high"] = high

    y_grid = np.linspace(-25.0, 35.0, 301)
    g0, g1 = analytic_partial_cdfs(y_grid)
    for delta in (0.0, 4.0, 8.0):
        m_low, m_high = makarov_bounds_avg(g0, g1, delta)
        golden[f"makarov_low_{delta:g}"] = m_low
        golden[f"makarov_high_{delta:g}"] = m_high
        golden[f"f_delta_cdf_{delta:g}"] = true_f_delta_cdf(delta)

    if include_radon:
        for T in (3.0, 6.0, 12.0):
            golden[f"radon_sup_error_T{T:g}"] = radon_inversion_error(T)
    golden = {key: float(value) for key, value in golden.items()}
    store.write_json("golden", golden)
    LOGGER.info("Wrote %s oracle values", len(golden))
    return golden
