"""Radon-inversion pipeline and direct sample-average estimators."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import Box, EstimatorConfig, RegressionConfig
from .base import (
    EstimationError,
    GridFunction2D,
    OutcomeTransform,
    Sample,
    Zeta,
    box_axes,
    constant_one,
    trapezoid_weights,
)
from .kernels import kernel_table, truncate
from .radon import QuadratureGrid, RadonInverse
from .regression import (
    density_at_observations,
    iter_local_weights,
    regress_1d,
    support_box,
    weighted_density_sv,
)

LOGGER = logging.getLogger("rc_treatment_effects.estimators")

PARTS = {"Y1_part": Zeta.D, "Y0_part": Zeta.D_MINUS_1}
DEFAULT_DENSITY_FLOOR_SHARE = 0.02
_DIRECT_ELEMENTS = 4_000_000

DensityPlugin = Union[None, float, np.ndarray, Callable[[Sample], np.ndarray]]


def grid_nodes(box: Box, grid_res: Sequence[int]) -> np.ndarray:
    gamma, theta = box_axes(box, grid_res)
    gg, tt = np.meshgrid(gamma, theta, indexing="ij")
    return np.column_stack([gg.ravel(), tt.ravel()])


def box_quadrature(box: Box, grid_res: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and trapezoid weights of a box at the given resolution."""
    gamma, theta = box_axes(box, grid_res)
    return grid_nodes(box, grid_res), np.outer(trapezoid_weights(gamma), trapezoid_weights(theta)).ravel()


def default_tau(sample: Sample) -> float:
    """Ten times the inter-quartile range of |y|."""
    q25, q75 = np.quantile(np.abs(sample.y), [0.25, 0.75])
    tau = 10.0 * float(q75 - q25)
    return tau if tau > 0 else float(np.max(np.abs(sample.y))) + 1.0


def default_y_grid(sample: Sample, size: int = 201) -> np.ndarray:
    """Evaluation grid spanning the sample range widened by three inter-quartile ranges."""
    q25, q75 = np.quantile(sample.y, [0.25, 0.75])
    pad = 3.0 * float(q75 - q25) or 1.0
    return np.linspace(float(sample.y.min()) - pad, float(sample.y.max()) + pad, size)


class RadonPipeline:
    """A_T composed with v-slopes of local-polynomial regressions on one quadrature grid.

    The regression pass is streamed: each chunk of equivalent-kernel rows is
    consumed immediately, either into sampled slopes (many gammas, few responses)
    or into linear functionals of the responses (few gammas, many responses).
    """

    def __init__(self, sample: Sample, cfg: EstimatorConfig) -> None:
        if cfg.L != 2:
            raise EstimationError("unsupported_dimension", f"the pipeline needs L = 2, got L = {cfg.L}")
        self.sample = sample
        self.cfg = cfg
        self.support = support_box(sample)
        self.grid = QuadratureGrid(
            n_phi=cfg.n_phi,
            n_u=cfg.n_u,
            u_lo=self.support.v_lo,
            u_hi=self.support.v_hi,
        )
        phi, u = self.grid.points()
        self.points = np.column_stack([phi, u])
        self._operators: Dict[float, RadonInverse] = {}

    def operator(self, T: Optional[float] = None) -> RadonInverse:
        T = float(T if T is not None else self.cfg.T)
        op = self._operators.get(T)
        if op is None:
            op = RadonInverse(self.grid, T, kind="A", psi=self.cfg.psi, L=self.cfg.L, quad_points=self.cfg.quad_points)
            self._operators[T] = op
        return op

    def _blocks(self):
        return iter_local_weights(self.sample, self.points, self.cfg.reg, box=self.support)

    def slopes(self, responses: np.ndarray) -> np.ndarray:
        """Zero-extended v-slopes of the response columns at every quadrature node."""
        responses = np.asarray(responses)
        squeeze = responses.ndim == 1
        columns = responses[:, None] if squeeze else responses
        dtype = np.result_type(columns.dtype, np.float64)
        out = np.zeros((self.grid.size, columns.shape[1]), dtype=dtype)
        for block in self._blocks():
            out[block.rows] = block.slope @ columns
        return out[:, 0] if squeeze else out

    def invert(self, slopes: np.ndarray, gammas: np.ndarray, T: Optional[float] = None) -> np.ndarray:
        return self.operator(T).apply(slopes, gammas)

    def evaluate(self, responses: np.ndarray, gammas: np.ndarray, T: Optional[float] = None) -> np.ndarray:
        return self.invert(self.slopes(responses), gammas, T)

    def functional(
        self,
        gammas: np.ndarray,
        gamma_weights: Optional[np.ndarray] = None,
        T: Optional[float] = None,
    ) -> np.ndarray:
        """Rows Lambda with Lambda @ responses = evaluate(responses, gammas).

        With ``gamma_weights`` the rows are collapsed into a single vector giving the
        weighted sum over gammas.
        """
        gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
        op = self.operator(T)
        n = self.sample.n
        out = np.zeros(n) if gamma_weights is not None else np.zeros((gammas.shape[0], n))
        for block in self._blocks():
            if not block.supported.any():
                continue
            index = np.arange(block.rows.start, block.rows.stop)[block.supported]
            kmat = op.kernel_block(gammas, index)
            slope = block.slope[block.supported]
            if gamma_weights is not None:
                out += (np.asarray(gamma_weights) @ kmat) @ slope
            else:
                out += kmat @ slope
        return out


def _grid(values: np.ndarray, cfg: EstimatorConfig, box: Optional[Box] = None) -> GridFunction2D:
    return GridFunction2D(box or cfg.box, np.asarray(values).reshape(tuple(cfg.grid_res)))


def pipeline_estimate(
    sample: Sample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    cfg: EstimatorConfig = EstimatorConfig(),
    *,
    clamp: Optional[bool] = None,
    pipeline: Optional[RadonPipeline] = None,
) -> GridFunction2D:
    """A_T applied to zero-extended v-slopes of E[phi(Y) zeta(D) | angle, v] on the config grid.

    The density case (phi = 1, zeta = D) is clamped at zero unless ``clamp`` says otherwise.
    """
    sample.require_treatment_variation()
    zeta = Zeta(zeta)
    if clamp is None:
        clamp = phi_fn is constant_one and zeta is Zeta.D
    pipeline = pipeline or RadonPipeline(sample, cfg)
    values = pipeline.evaluate(sample.responses(phi_fn, zeta), grid_nodes(cfg.box, cfg.grid_res))
    if clamp:
        values = np.maximum(values.real, 0.0)
    return _grid(values, cfg)


def estimate_density(sample: Sample, cfg: EstimatorConfig = EstimatorConfig()) -> GridFunction2D:
    return pipeline_estimate(sample, constant_one, Zeta.D, cfg)


def _density_values(sample: Sample, cfg: EstimatorConfig, density: DensityPlugin) -> np.ndarray:
    if density is None:
        return density_at_observations(sample, cfg.density_bandwidths)
    if callable(density):
        return np.asarray(density(sample), dtype=float)
    return np.broadcast_to(np.asarray(density, dtype=float), (sample.n,))


def _direct_terms(
    sample: Sample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    cfg: EstimatorConfig,
    denominators: np.ndarray,
) -> np.ndarray:
    tau = cfg.tau if cfg.tau is not None else default_tau(sample)
    values = np.asarray(phi_fn(sample.y))
    values = truncate(tau, values) if not np.iscomplexobj(values) else values
    return values * Zeta(zeta).apply(sample.d) / np.maximum(denominators, cfg.m_floor)


def _direct_sum(sample: Sample, cfg: EstimatorConfig, terms: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
    table = kernel_table(cfg.L, cfg.psi, cfg.quad_points)
    s = sample.s
    dtype = np.result_type(terms.dtype, np.float64)
    out = np.zeros(gammas.shape[0], dtype=dtype)
    chunk = max(1, _DIRECT_ELEMENTS // sample.n)
    for start in range(0, gammas.shape[0], chunk):
        block = gammas[start : start + chunk]
        kt = table.Ktilde(cfg.T, block @ s.T - sample.v[None, :])
        out[start : start + chunk] = kt @ terms / sample.n
    return out


def direct_estimate(
    sample: Sample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    cfg: EstimatorConfig,
    gamma: Sequence[float],
    *,
    density: DensityPlugin = None,
) -> Union[float, complex]:
    """(1/N) sum K~_T(s_i'gamma - v_i) T_tau(phi(y_i)) zeta(d_i) / max(f(s_i, v_i), m)."""
    terms = _direct_terms(sample, phi_fn, zeta, cfg, _density_values(sample, cfg, density))
    value = _direct_sum(sample, cfg, terms, np.asarray(gamma, dtype=float)[None, :])[0]
    return complex(value) if np.iscomplexobj(value) else float(value)


def direct_estimate_grid(
    sample: Sample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    cfg: EstimatorConfig,
    *,
    density: DensityPlugin = None,
    clamp: bool = False,
) -> GridFunction2D:
    terms = _direct_terms(sample, phi_fn, zeta, cfg, _density_values(sample, cfg, density))
    values = _direct_sum(sample, cfg, terms, grid_nodes(cfg.box, cfg.grid_res))
    if clamp:
        values = np.maximum(values.real, 0.0)
    return _grid(values, cfg)


def gaussian_x_kernel(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def direct_estimate_x(
    sample: Sample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    cfg: EstimatorConfig,
    gamma: Sequence[float],
    x: Sequence[float],
    eta: Sequence[float],
    *,
    x_kernel: Callable[[np.ndarray], np.ndarray] = gaussian_x_kernel,
    density: DensityPlugin = None,
) -> Union[float, complex]:
    """Direct estimator with every term weighted by the covariate kernel K_eta(x_i - x).

    Without an explicit density plug-in the denominator is the joint kernel estimate
    of (angle, v, x) at each observation, so the covariate weights cancel on average.
    """
    if sample.x is None:
        raise EstimationError("missing_covariates", "sample has no covariate columns")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eta = np.broadcast_to(np.asarray(eta, dtype=float), x.shape)
    if x.shape[0] != sample.x.shape[1]:
        raise EstimationError("invalid_input", f"covariate point has {x.shape[0]} entries, sample has {sample.x.shape[1]}")
    if np.any(eta <= 0):
        raise EstimationError("invalid_input", "covariate bandwidths must be > 0")
    weights = np.prod(x_kernel((sample.x - x[None, :]) / eta[None, :]) / eta[None, :], axis=1)
    if density is None:
        points = np.column_stack([sample.phi_angle, sample.v])
        denominators = weighted_density_sv(sample, points, weights, cfg.density_bandwidths)
    else:
        denominators = _density_values(sample, cfg, density)
    terms = _direct_terms(sample, phi_fn, zeta, cfg, denominators) * weights
    value = _direct_sum(sample, cfg, terms, np.asarray(gamma, dtype=float)[None, :])[0]
    return complex(value) if np.iscomplexobj(value) else float(value)


@dataclass(frozen=True)
class UcateParts:
    """Density, UCATE times density, and the masked UCATE ratio on one grid."""

    density: GridFunction2D
    ucate_times_f: GridFunction2D
    ucate: GridFunction2D
    dens_floor: float


def masked_ratio(numerator: np.ndarray, density: np.ndarray, floor: float) -> Tuple[np.ndarray, np.ndarray]:
    mask = density < floor
    if mask.all():
        raise EstimationError(
            "empty_unmasked_region",
            f"density estimate is below the floor {floor:.4g} everywhere on the grid",
        )
    ratio = np.where(mask, 0.0, numerator / np.where(mask, 1.0, density))
    return ratio, mask


def estimate_ucate_parts(
    sample: Sample,
    cfg: EstimatorConfig = EstimatorConfig(),
    density_cfg: Optional[EstimatorConfig] = None,
    *,
    pipeline: Optional[RadonPipeline] = None,
) -> UcateParts:
    """One regression pass for the density (response D) and the UCATE numerator (response Y).

    ``density_cfg`` may carry a different cutoff T for the density; its grid must match.
    """
    sample.require_treatment_variation()
    density_cfg = density_cfg or cfg
    if density_cfg.box != cfg.box or tuple(density_cfg.grid_res) != tuple(cfg.grid_res):
        raise EstimationError("grid_mismatch", "density and numerator grids must coincide")
    pipeline = pipeline or RadonPipeline(sample, cfg)
    gammas = grid_nodes(cfg.box, cfg.grid_res)
    slopes = pipeline.slopes(np.column_stack([sample.d.astype(float), sample.y]))
    density = np.maximum(pipeline.invert(slopes[:, 0], gammas, density_cfg.T), 0.0)
    numerator = pipeline.invert(slopes[:, 1], gammas, cfg.T)
    floor = cfg.dens_floor if cfg.dens_floor is not None else DEFAULT_DENSITY_FLOOR_SHARE * float(density.max())
    ratio, mask = masked_ratio(numerator, density, floor)
    shape = tuple(cfg.grid_res)
    LOGGER.debug("UCATE grid masked=%s of %s floor=%.4g", int(mask.sum()), mask.size, floor)
    return UcateParts(
        density=GridFunction2D(cfg.box, density.reshape(shape)),
        ucate_times_f=GridFunction2D(cfg.box, numerator.reshape(shape)),
        ucate=GridFunction2D(cfg.box, ratio.reshape(shape), mask.reshape(shape)),
        dens_floor=floor,
    )


def estimate_ucate(sample: Sample, cfg: EstimatorConfig = EstimatorConfig()) -> GridFunction2D:
    """UCATE surface: numerator over density, masked where the density is below the floor."""
    return estimate_ucate_parts(sample, cfg).ucate


def estimate_ate(ucate_times_f: GridFunction2D, box: Optional[Box] = None) -> float:
    """Box integral of the UCATE*f grid."""
    value = ucate_times_f.integrate(box)
    return float(value.real) if isinstance(value, complex) else float(value)


WeightFn = Callable[[np.ndarray], np.ndarray]


def _selection_share(sample: Sample, gammas: np.ndarray, treated: bool) -> np.ndarray:
    s = sample.s
    out = np.empty(gammas.shape[0])
    chunk = max(1, _DIRECT_ELEMENTS // sample.n)
    for start in range(0, gammas.shape[0], chunk):
        proj = gammas[start : start + chunk] @ s.T
        below = proj < sample.v[None, :]
        out[start : start + chunk] = (below if treated else ~below).mean(axis=1)
    return out


def tt_weight(sample: Sample) -> WeightFn:
    """h_TT(gamma) = mean(1{s_i'gamma < v_i}) / mean(d_i)."""
    share = float(sample.d.mean())
    if share == 0.0:
        raise EstimationError("no_treated", "no treated observations")
    return lambda gammas: _selection_share(sample, gammas, True) / share


def tut_weight(sample: Sample) -> WeightFn:
    """h_TUT(gamma) = mean(1{s_i'gamma >= v_i}) / mean(1 - d_i)."""
    share = 1.0 - float(sample.d.mean())
    if share == 0.0:
        raise EstimationError("no_untreated", "no untreated observations")
    return lambda gammas: _selection_share(sample, gammas, False) / share


def _weighted_integral(ucate_times_f: GridFunction2D, weight: WeightFn, box: Optional[Box]) -> float:
    weights = np.asarray(weight(ucate_times_f.nodes()), dtype=float).reshape(ucate_times_f.shape)
    product = GridFunction2D(ucate_times_f.box, ucate_times_f.values.real * weights, ucate_times_f.mask)
    return float(product.integrate(box))


def estimate_tt(
    sample: Sample,
    ucate_times_f: GridFunction2D,
    box: Optional[Box] = None,
    *,
    weight: Optional[WeightFn] = None,
) -> float:
    """Treatment effect on the treated: box integral of h_TT times UCATE*f."""
    return _weighted_integral(ucate_times_f, weight or tt_weight(sample), box)


def estimate_tut(
    sample: Sample,
    ucate_times_f: GridFunction2D,
    box: Optional[Box] = None,
    *,
    weight: Optional[WeightFn] = None,
) -> float:
    return _weighted_integral(ucate_times_f, weight or tut_weight(sample), box)


def integration_domain(density: GridFunction2D, level: float) -> Box:
    """Bounding box of the grid nodes where the density exceeds level * max density."""
    values = np.where(density.active(), density.values.real, -np.inf)
    peak = float(values.max())
    above = values > level * peak
    if peak <= 0 or not above.any():
        raise EstimationError("empty_unmasked_region", "density estimate has no mass above the level")
    gi, ti = np.nonzero(above)
    gamma, theta = density.gamma, density.theta
    lo_g, hi_g = gamma[gi.min()], gamma[gi.max()]
    lo_t, hi_t = theta[ti.min()], theta[ti.max()]
    dg, dt = density.spacing
    if hi_g <= lo_g:
        hi_g = min(lo_g + dg, density.box.g_hi)
        lo_g = hi_g - dg
    if hi_t <= lo_t:
        hi_t = min(lo_t + dt, density.box.t_hi)
        lo_t = hi_t - dt
    return Box(float(lo_g), float(hi_g), float(lo_t), float(hi_t))


class CdfEstimate(NamedTuple):
    y_grid: np.ndarray
    raw: np.ndarray
    cdf: np.ndarray


def rearrange_cdf(values: np.ndarray) -> np.ndarray:
    """Monotone rearrangement on the grid, clipped to [0, 1]."""
    return np.clip(np.sort(np.asarray(values, dtype=float)), 0.0, 1.0)


def _cumulative_at(y: np.ndarray, weights: np.ndarray, y_grid: np.ndarray) -> np.ndarray:
    order = np.argsort(y, kind="stable")
    sorted_y = y[order]
    cums = np.concatenate([[0.0], np.cumsum(weights[order])])
    return cums[np.searchsorted(sorted_y, y_grid, side="right")]


def marginal_cdf_functional(
    sample: Sample,
    cfg: EstimatorConfig,
    box: Optional[Box] = None,
    *,
    pipeline: Optional[RadonPipeline] = None,
) -> np.ndarray:
    """Vector lambda with lambda @ responses = box integral of the pipeline estimate."""
    pipeline = pipeline or RadonPipeline(sample, cfg)
    nodes, weights = box_quadrature(box or cfg.box, cfg.grid_res)
    return pipeline.functional(nodes, weights)


def estimate_marginal_cdf_grid(
    sample: Sample,
    cfg: EstimatorConfig,
    j: int,
    y_grid: Optional[np.ndarray] = None,
    box: Optional[Box] = None,
    *,
    functional: Optional[np.ndarray] = None,
) -> CdfEstimate:
    """F_{Y_j} on a y-grid: box integral of the pipeline with phi = 1{. <= y}."""
    if j not in (0, 1):
        raise EstimationError("invalid_input", f"potential outcome index must be 0 or 1, got {j!r}")
    sample.require_treatment_variation()
    y_grid = np.sort(np.asarray(y_grid if y_grid is not None else default_y_grid(sample), dtype=float))
    lam = functional if functional is not None else marginal_cdf_functional(sample, cfg, box)
    zeta = Zeta.D if j == 1 else Zeta.D_MINUS_1
    raw = _cumulative_at(sample.y, lam * zeta.apply(sample.d), y_grid)
    return CdfEstimate(y_grid, raw, rearrange_cdf(raw))


def estimate_marginal_cdf(
    sample: Sample,
    cfg: EstimatorConfig,
    j: int,
    y: float,
    box: Optional[Box] = None,
    *,
    y_grid: Optional[np.ndarray] = None,
) -> float:
    grid = np.union1d(np.asarray(y_grid if y_grid is not None else default_y_grid(sample)), [y])
    estimate = estimate_marginal_cdf_grid(sample, cfg, j, grid, box)
    return float(estimate.cdf[np.searchsorted(estimate.y_grid, y)])


class Quantile(NamedTuple):
    value: float
    flat: bool


def invert_cdf(y_grid: np.ndarray, cdf: np.ndarray, level: float) -> Quantile:
    """Smallest y with F(y) >= level, interpolated; flags flat or unreachable levels."""
    if cdf[-1] < level:
        return Quantile(float(y_grid[-1]), True)
    k = int(np.argmax(cdf >= level))
    flat = int(np.count_nonzero(np.isclose(cdf, level, rtol=0.0, atol=1e-12))) > 1
    if k == 0:
        return Quantile(float(y_grid[0]), flat or cdf[0] > level)
    lo, hi = cdf[k - 1], cdf[k]
    if hi <= lo:
        return Quantile(float(y_grid[k]), True)
    frac = (level - lo) / (hi - lo)
    return Quantile(float(y_grid[k - 1] + frac * (y_grid[k] - y_grid[k - 1])), flat)


class QteResult(NamedTuple):
    value: float
    q1: float
    q0: float
    flat: bool


def qte(
    sample: Sample,
    cfg: EstimatorConfig,
    tau_q: float,
    box: Optional[Box] = None,
    *,
    y_grid: Optional[np.ndarray] = None,
) -> QteResult:
    """Quantile treatment effect q1(tau) - q0(tau) from the estimated marginal CDFs."""
    if not 0.0 < tau_q < 1.0:
        raise EstimationError("invalid_input", "quantile level must lie in (0, 1)")
    lam = marginal_cdf_functional(sample, cfg, box)
    y_grid = y_grid if y_grid is not None else default_y_grid(sample, 401)
    f1 = estimate_marginal_cdf_grid(sample, cfg, 1, y_grid, box, functional=lam)
    f0 = estimate_marginal_cdf_grid(sample, cfg, 0, y_grid, box, functional=lam)
    q1 = invert_cdf(f1.y_grid, f1.cdf, tau_q)
    q0 = invert_cdf(f0.y_grid, f0.cdf, tau_q)
    if q1.flat or q0.flat:
        LOGGER.warning("Flat CDF at quantile level tau=%.3f; nearest grid quantile used", tau_q)
    return QteResult(q1.value - q0.value, q1.value, q0.value, q1.flat or q0.flat)


def _scalar_denominator(sample: Sample, cfg: RegressionConfig, n_grid: int) -> Tuple[float, np.ndarray]:
    lo, hi = np.quantile(sample.v, [0.001, 0.999])
    grid = np.linspace(lo, hi, n_grid)
    fit = regress_1d(sample.v, sample.d.astype(float), grid, cfg.bandwidth_v, kernel=cfg.kernel, degree=cfg.degree)
    total = float(np.sum(trapezoid_weights(grid) * fit.slopes))
    if total <= 0:
        raise EstimationError("denominator_nonpositive", f"integrated propensity slope is {total:.4g}")
    return total, grid


def estimate_scalar_theta_grid(
    sample: Sample,
    cfg: RegressionConfig,
    phi_fn: OutcomeTransform,
    thetas: np.ndarray,
    *,
    zeta: Zeta = Zeta.D,
    n_grid: int = 401,
) -> np.ndarray:
    """Scalar-instrument ratio: v-slope of E[phi(Y) zeta(D) | V] over the integrated slope of E[D | V]."""
    sample.require_treatment_variation()
    total, _ = _scalar_denominator(sample, cfg, n_grid)
    fit = regress_1d(
        sample.v,
        sample.responses(phi_fn, zeta),
        np.asarray(thetas, dtype=float),
        cfg.bandwidth_v,
        kernel=cfg.kernel,
        degree=cfg.degree,
    )
    return fit.slopes / total


def estimate_scalar_theta(
    sample: Sample,
    cfg: RegressionConfig,
    phi_fn: OutcomeTransform,
    theta: float,
    *,
    zeta: Zeta = Zeta.D,
) -> Union[float, complex]:
    value = estimate_scalar_theta_grid(sample, cfg, phi_fn, np.array([theta]), zeta=zeta)[0]
    return complex(value) if np.iscomplexobj(value) else float(value)


def stratified_estimate(
    sample: Sample,
    b_value: int,
    estimator: Callable[..., Any],
    *args: Any,
    **kwargs: Any,
) -> Any:
    """Run ``estimator`` on the observations whose binary instrument equals ``b_value``."""
    if sample.b is None:
        raise EstimationError("invalid_input", "sample has no binary instrument column")
    if b_value not in (0, 1):
        raise EstimationError("invalid_input", f"binary instrument value must be 0 or 1, got {b_value!r}")
    subsample = sample.restrict(sample.b == b_value)
    LOGGER.debug("Stratified estimate b=%s n=%s of %s", b_value, subsample.n, sample.n)
    return estimator(subsample, *args, **kwargs)


def fourier_responses(sample: Sample, ts: np.ndarray, zeta: Zeta) -> np.ndarray:
    """Columns exp(i t y_i) zeta(d_i) for every t, shape (N, n_t)."""
    return np.exp(1j * np.outer(sample.y, np.asarray(ts, dtype=float))) * Zeta(zeta).apply(sample.d)[:, None]


def estimate_partial_ft_grid(
    sample: Sample,
    cfg: EstimatorConfig,
    ts: np.ndarray,
    gammas: np.ndarray,
    variants: Sequence[str] = ("Y1_part", "Y0_part"),
    *,
    functional: Optional[np.ndarray] = None,
) -> Dict[str, np.ndarray]:
    """Partial Fourier transforms for every (gamma, t): arrays of shape (n_gamma, n_t) per variant."""
    for variant in variants:
        if variant not in PARTS:
            raise EstimationError("invalid_input", f"unknown partial transform {variant!r}")
    sample.require_treatment_variation()
    gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
    lam = functional if functional is not None else RadonPipeline(sample, cfg).functional(gammas)
    return {variant: lam @ fourier_responses(sample, ts, PARTS[variant]) for variant in variants}


def estimate_partial_ft(
    sample: Sample,
    cfg: EstimatorConfig,
    t: float,
    gamma: Sequence[float],
    variant: str,
) -> complex:
    """Pipeline estimate with phi(y) = exp(i t y); Y1_part uses zeta = D, Y0_part zeta = D - 1."""
    values = estimate_partial_ft_grid(sample, cfg, np.array([t]), np.asarray(gamma)[None, :], (variant,))
    return complex(values[variant][0, 0])


__all__ = [
    "CdfEstimate",
    "PARTS",
    "QteResult",
    "RadonPipeline",
    "UcateParts",
    "default_tau",
    "default_y_grid",
    "direct_estimate",
    "direct_estimate_grid",
    "direct_estimate_x",
    "estimate_ate",
    "estimate_density",
    "estimate_marginal_cdf",
    "estimate_marginal_cdf_grid",
    "estimate_partial_ft",
    "estimate_partial_ft_grid",
    "estimate_scalar_theta",
    "estimate_scalar_theta_grid",
    "estimate_tt",
    "estimate_tut",
    "estimate_ucate",
    "estimate_ucate_parts",
    "grid_nodes",
    "integration_domain",
    "invert_cdf",
    "pipeline_estimate",
    "qte",
    "stratified_estimate",
    "tt_weight",
    "tut_weight",
]
