"""Local-polynomial regression with v-slopes, and instrument density estimation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import RegressionConfig
from .base import EstimationError, OutcomeTransform, Sample, Zeta

LOGGER = logging.getLogger("rc_treatment_effects.regression")

WORK_ELEMENTS = 4_000_000
MAX_CONDITION = 1e12
SUPPORT_QUANTILES = (0.001, 0.999)
_GAUSS_NORM = 1.0 / math.sqrt(2.0 * math.pi)


def kernel_weights(z: np.ndarray, kernel: str) -> np.ndarray:
    """One-dimensional regression kernel evaluated at standardized distances."""
    if kernel == "gaussian":
        return _GAUSS_NORM * np.exp(-0.5 * z * z)
    if kernel == "epanechnikov":
        return 0.75 * np.clip(1.0 - z * z, 0.0, None)
    raise EstimationError("invalid_input", f"unknown regression kernel {kernel!r}")


def _design_columns(degree: int) -> int:
    return 3 if degree == 1 else 6


# Index of the v-slope coefficient in both designs.
SLOPE_COLUMN = 2


@dataclass(frozen=True)
class SupportBox:
    """Rectangle in (angle, v) outside which regressions are treated as unsupported."""

    phi_lo: float
    phi_hi: float
    v_lo: float
    v_hi: float

    def contains(self, phi: np.ndarray, v: np.ndarray) -> np.ndarray:
        return (phi >= self.phi_lo) & (phi <= self.phi_hi) & (v >= self.v_lo) & (v <= self.v_hi)


def support_box(sample: Sample) -> SupportBox:
    v_lo, v_hi = np.quantile(sample.v, SUPPORT_QUANTILES)
    return SupportBox(
        float(sample.phi_angle.min()),
        float(sample.phi_angle.max()),
        float(v_lo),
        float(v_hi),
    )


@dataclass(frozen=True)
class LocalWeights:
    """Equivalent-kernel rows for a chunk of query points.

    ``value @ responses`` is the local fit and ``slope @ responses`` the v-slope;
    rows of unsupported points are zero.
    """

    rows: slice
    value: np.ndarray
    slope: np.ndarray
    supported: np.ndarray


def iter_local_weights(
    sample: Sample,
    points: np.ndarray,
    cfg: RegressionConfig,
    *,
    box: Optional[SupportBox] = None,
) -> Iterator[LocalWeights]:
    """Yield local-polynomial equivalent kernels for query points (angle, v), chunk by chunk."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    box = box or support_box(sample)
    n = sample.n
    p = _design_columns(cfg.degree)
    min_support = max(p, cfg.degree + 2)
    chunk = max(1, WORK_ELEMENTS // (n * p))
    phi_i = sample.phi_angle[None, :]
    v_i = sample.v[None, :]

    for start in range(0, points.shape[0], chunk):
        rows = slice(start, min(start + chunk, points.shape[0]))
        at = points[rows]
        c = at.shape[0]
        d_phi = phi_i - at[:, 0:1]
        d_v = v_i - at[:, 1:2]
        weights = kernel_weights(d_phi / cfg.bandwidth_phi, cfg.kernel) * kernel_weights(
            d_v / cfg.bandwidth_v, cfg.kernel
        )
        columns = [np.ones_like(d_phi), d_phi, d_v]
        if cfg.degree == 2:
            columns += [d_phi * d_phi, d_phi * d_v, d_v * d_v]
        design = np.stack(columns, axis=-1)
        weighted = design * weights[..., None]
        gram = np.einsum("cnp,cnq->cpq", weighted, design)

        supported = box.contains(at[:, 0], at[:, 1])
        supported &= np.count_nonzero(weights > 0.0, axis=1) >= min_support
        if supported.any():
            cond = np.full(c, np.inf)
            cond[supported] = np.linalg.cond(gram[supported])
            supported &= cond <= MAX_CONDITION
        gram[~supported] = np.eye(p)

        # Rows 0 and SLOPE_COLUMN of gram^-1 X'W give value and v-slope weights.
        selector = np.zeros((p, 2))
        selector[0, 0] = 1.0
        selector[SLOPE_COLUMN, 1] = 1.0
        coef = np.linalg.solve(gram, np.broadcast_to(selector, (c, p, 2)))
        equivalent = np.einsum("cnp,cpk->ckn", weighted, coef)
        equivalent[~supported] = 0.0
        yield LocalWeights(rows, equivalent[:, 0, :], equivalent[:, 1, :], supported)


class LocalFit(NamedTuple):
    values: np.ndarray
    slopes: np.ndarray
    supported: np.ndarray


def regress_many(
    sample: Sample,
    points: np.ndarray,
    responses: np.ndarray,
    cfg: RegressionConfig,
) -> LocalFit:
    """Local fits and v-slopes of one or more response columns at many points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    responses = np.asarray(responses)
    squeeze = responses.ndim == 1
    columns = responses[:, None] if squeeze else responses
    dtype = np.result_type(columns.dtype, np.float64)
    values = np.zeros((points.shape[0], columns.shape[1]), dtype=dtype)
    slopes = np.zeros_like(values)
    supported = np.zeros(points.shape[0], dtype=bool)
    for block in iter_local_weights(sample, points, cfg):
        values[block.rows] = block.value @ columns
        slopes[block.rows] = block.slope @ columns
        supported[block.rows] = block.supported
    if squeeze:
        return LocalFit(values[:, 0], slopes[:, 0], supported)
    return LocalFit(values, slopes, supported)


class LocalEstimate(NamedTuple):
    value: Union[float, complex]
    dvalue_dv: Union[float, complex]
    supported: bool


def _scalar(value: np.generic) -> Union[float, complex]:
    return complex(value) if np.iscomplexobj(value) else float(value)


def local_poly_regress(
    sample: Sample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    at: Tuple[float, float],
    cfg: RegressionConfig = RegressionConfig(),
) -> LocalEstimate:
    """Local-polynomial fit of phi(y) zeta(d) at (angle, v) with its v-slope.

    Complex transforms are fitted through their real and imaginary parts, which
    the linear smoother handles in one pass. Unsupported points come back as
    zeros with ``supported=False``.
    """
    responses = sample.responses(phi_fn, zeta)
    fit = regress_many(sample, np.array([at], dtype=float), responses, cfg)
    if not fit.supported[0]:
        LOGGER.debug("Unsupported regression point at=%s", at)
    return LocalEstimate(_scalar(fit.values[0]), _scalar(fit.slopes[0]), bool(fit.supported[0]))


def regress_1d(
    v: np.ndarray,
    responses: np.ndarray,
    points: np.ndarray,
    bandwidth: float,
    *,
    kernel: str = "epanechnikov",
    degree: int = 1,
) -> LocalFit:
    """Local-polynomial fit in a scalar instrument, returning values and slopes."""
    v = np.asarray(v, dtype=float)
    responses = np.asarray(responses)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if degree not in (1, 2):
        raise EstimationError("invalid_input", "regression degree must be 1 or 2")
    p = degree + 1
    v_lo, v_hi = np.quantile(v, SUPPORT_QUANTILES)
    dtype = np.result_type(responses.dtype, np.float64)
    values = np.zeros(points.shape, dtype=dtype)
    slopes = np.zeros(points.shape, dtype=dtype)
    supported = np.zeros(points.shape, dtype=bool)
    chunk = max(1, WORK_ELEMENTS // (v.size * p))
    for start in range(0, points.size, chunk):
        rows = slice(start, min(start + chunk, points.size))
        dv = v[None, :] - points[rows, None]
        weights = kernel_weights(dv / bandwidth, kernel)
        design = np.stack([dv**k for k in range(p)], axis=-1)
        weighted = design * weights[..., None]
        gram = np.einsum("cnp,cnq->cpq", weighted, design)
        ok = (points[rows] >= v_lo) & (points[rows] <= v_hi)
        ok &= np.count_nonzero(weights > 0.0, axis=1) >= degree + 2
        if ok.any():
            cond = np.full(ok.shape, np.inf)
            cond[ok] = np.linalg.cond(gram[ok])
            ok &= cond <= MAX_CONDITION
        gram[~ok] = np.eye(p)
        coef = np.linalg.solve(gram, np.einsum("cnp,n->cp", weighted, responses)[..., None])[..., 0]
        coef[~ok] = 0.0
        values[rows] = coef[:, 0]
        slopes[rows] = coef[:, 1]
        supported[rows] = ok
    return LocalFit(values, slopes, supported)


def local_poly_regress_1d(
    v: np.ndarray,
    responses: np.ndarray,
    at: float,
    bandwidth: float,
    *,
    kernel: str = "epanechnikov",
    degree: int = 1,
) -> LocalEstimate:
    fit = regress_1d(v, responses, np.array([at]), bandwidth, kernel=kernel, degree=degree)
    return LocalEstimate(_scalar(fit.values[0]), _scalar(fit.slopes[0]), bool(fit.supported[0]))


def scott_bandwidths(sample: Sample) -> Tuple[float, float]:
    """Scott's rule for a two-dimensional Gaussian product kernel."""
    factor = sample.n ** (-1.0 / 6.0)
    sd_phi = float(np.std(sample.phi_angle, ddof=1)) if sample.n > 1 else 1.0
    sd_v = float(np.std(sample.v, ddof=1)) if sample.n > 1 else 1.0
    return (max(sd_phi, 1e-3) * factor, max(sd_v, 1e-3) * factor)


def _check_bandwidths(bandwidths: Sequence[float]) -> Tuple[float, float]:
    h_phi, h_v = (float(h) for h in bandwidths)
    if h_phi <= 0 or h_v <= 0:
        raise EstimationError("invalid_input", "density bandwidths must be > 0")
    return h_phi, h_v


def weighted_density_sv(
    sample: Sample,
    points: np.ndarray,
    weights: Optional[np.ndarray] = None,
    bandwidths: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """(1/N) sum_j w_j K_h(angle - angle_j) K_h(v - v_j), reflected at angle 0 and pi."""
    # Diagonal kernel with fixed (h_phi, h_v), defined from a single observation up.
    points = np.atleast_2d(np.asarray(points, dtype=float))
    h_phi, h_v = _check_bandwidths(bandwidths if bandwidths is not None else scott_bandwidths(sample))
    weights = np.ones(sample.n) if weights is None else np.asarray(weights, dtype=float)
    images = (sample.phi_angle, -sample.phi_angle, 2.0 * math.pi - sample.phi_angle)
    out = np.empty(points.shape[0])
    chunk = max(1, WORK_ELEMENTS // sample.n)
    norm = _GAUSS_NORM**2 / (h_phi * h_v * sample.n)
    for start in range(0, points.shape[0], chunk):
        at = points[start : start + chunk]
        k_v = np.exp(-0.5 * ((at[:, 1:2] - sample.v[None, :]) / h_v) ** 2)
        k_phi = sum(np.exp(-0.5 * ((at[:, 0:1] - image[None, :]) / h_phi) ** 2) for image in images)
        out[start : start + chunk] = (k_phi * k_v) @ weights * norm
    return out


def density_sv(
    sample: Sample,
    at: Tuple[float, float],
    bandwidths: Optional[Sequence[float]] = None,
) -> float:
    """Product Gaussian KDE of the (angle, v) density with boundary reflection in the angle."""
    return float(weighted_density_sv(sample, np.array([at], dtype=float), None, bandwidths)[0])


def density_sv_many(
    sample: Sample,
    points: np.ndarray,
    bandwidths: Optional[Sequence[float]] = None,
) -> np.ndarray:
    return weighted_density_sv(sample, points, None, bandwidths)


def density_at_observations(sample: Sample, bandwidths: Optional[Sequence[float]] = None) -> np.ndarray:
    """Plug-in density evaluated at every observation; cached per sample and bandwidth."""
    key = ("density_at_observations", None if bandwidths is None else tuple(bandwidths))
    cached = sample._cache.get(key)
    if cached is None:
        cached = weighted_density_sv(sample, np.column_stack([sample.phi_angle, sample.v]), None, bandwidths)
        cached.setflags(write=False)
        sample._cache[key] = cached
    return cached
