"""Conditional deconvolution of the effect density and its mixture over the coefficients."""

from __future__ import annotations

import logging
import math
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from ..config import Box, DeconvConfig, EstimatorConfig
from .base import EstimationError, Sample, Zeta, compensated_sum, trapezoid_weights
from .estimators import RadonPipeline, box_quadrature, fourier_responses, tt_weight
from .kernels import eval_deconv_kernel

LOGGER = logging.getLogger("rc_treatment_effects.deconv")

CharacteristicFn = Callable[[np.ndarray], np.ndarray]
ArrayLike = Union[float, np.ndarray]


def frequency_grid(dc: DeconvConfig) -> np.ndarray:
    return np.linspace(-dc.R_delta, dc.R_delta, dc.n_t)


def _invert(ratio: np.ndarray, ts: np.ndarray, dc: DeconvConfig, deltas: np.ndarray) -> np.ndarray:
    """(1/2 pi) int exp(-i t delta) K(t / R) ratio(t) dt by the trapezoid rule, for each delta."""
    weights = trapezoid_weights(ts) * np.asarray(eval_deconv_kernel(dc.kernel, ts / dc.R_delta))
    phases = np.exp(-1j * np.outer(deltas, ts))
    values = phases @ (weights * ratio) / (2.0 * math.pi)
    return values.real


def oracle_deconv(
    cf_num: CharacteristicFn,
    cf_den: CharacteristicFn,
    dc: DeconvConfig,
    delta: ArrayLike,
) -> ArrayLike:
    """Fourier inversion of cf_num / cf_den with the configured window and smoothing kernel."""
    ts = frequency_grid(dc)
    den = np.asarray(cf_den(ts), dtype=complex)
    if np.any(den == 0) or not np.all(np.isfinite(den)):
        raise EstimationError("cf_zero", "denominator characteristic function vanishes inside the window")
    ratio = np.asarray(cf_num(ts), dtype=complex) / den
    deltas = np.atleast_1d(np.asarray(delta, dtype=float))
    values = _invert(ratio, ts, dc, deltas)
    return float(values[0]) if np.ndim(delta) == 0 else values


class UcditeCurve(NamedTuple):
    deltas: np.ndarray
    values: np.ndarray
    fully_trimmed: bool
    trimmed_share: float


def _ucdite_from_transforms(
    num: np.ndarray,
    den: np.ndarray,
    ts: np.ndarray,
    dc: DeconvConfig,
    deltas: np.ndarray,
) -> UcditeCurve:
    keep = np.abs(den) > dc.trim_level
    if not keep.any():
        return UcditeCurve(deltas, np.zeros(deltas.shape), True, 1.0)
    ratio = np.where(keep, num / np.where(keep, den, 1.0), 0.0)
    return UcditeCurve(deltas, _invert(ratio, ts, dc, deltas), False, float(1.0 - keep.mean()))


def estimate_ucdite_curve(
    sample: Sample,
    est_cfg: EstimatorConfig,
    dc: DeconvConfig,
    deltas: Sequence[float],
    gamma: Sequence[float],
    *,
    pipeline: Optional[RadonPipeline] = None,
) -> UcditeCurve:
    """Effect density given gamma on a delta grid, from the two estimated partial transforms."""
    sample.require_treatment_variation()
    ts = frequency_grid(dc)
    pipeline = pipeline or RadonPipeline(sample, est_cfg)
    lam = pipeline.functional(np.asarray(gamma, dtype=float)[None, :])[0]
    num = lam @ fourier_responses(sample, ts, Zeta.D)
    den = lam @ fourier_responses(sample, ts, Zeta.D_MINUS_1)
    curve = _ucdite_from_transforms(num, den, ts, dc, np.asarray(deltas, dtype=float))
    if curve.fully_trimmed:
        LOGGER.warning("UCDITE fully trimmed at gamma=%s trim=%.4g", tuple(gamma), dc.trim_level)
    return curve


class UcditeValue(NamedTuple):
    value: float
    fully_trimmed: bool


def estimate_ucdite(
    sample: Sample,
    est_cfg: EstimatorConfig,
    dc: DeconvConfig,
    delta: float,
    gamma: Sequence[float],
) -> UcditeValue:
    curve = estimate_ucdite_curve(sample, est_cfg, dc, [delta], gamma)
    return UcditeValue(float(curve.values[0]), curve.fully_trimmed)


class FDeltaCurve(NamedTuple):
    deltas: np.ndarray
    values: np.ndarray
    trimmed_nodes: int
    mass_density: float


GammaFn = Callable[[np.ndarray], np.ndarray]


def estimate_f_delta_curve(
    sample: Sample,
    est_cfg: EstimatorConfig,
    dc: DeconvConfig,
    deltas: Sequence[float],
    box: Optional[Box] = None,
    *,
    weighting: str = "ate",
    density: Optional[GammaFn] = None,
) -> FDeltaCurve:
    """Mixture of conditional effect densities over a gamma-grid on ``box``.

    The mixing density is the clamped pipeline density at the same cutoff unless
    ``density`` supplies values at the grid nodes. ``weighting="tt"`` targets the
    treated population through the h_TT weight.
    """
    if weighting not in ("ate", "tt"):
        raise EstimationError("invalid_input", f"weighting must be 'ate' or 'tt', got {weighting!r}")
    sample.require_treatment_variation()
    deltas = np.asarray(deltas, dtype=float)
    nodes, node_weights = box_quadrature(box or est_cfg.box, dc.gamma_grid)
    ts = frequency_grid(dc)
    lam = RadonPipeline(sample, est_cfg).functional(nodes)
    if density is None:
        mixing = np.maximum(lam @ sample.d.astype(float), 0.0)
    else:
        mixing = np.asarray(density(nodes), dtype=float)
    if weighting == "tt":
        mixing = mixing * tt_weight(sample)(nodes)
    num = lam @ fourier_responses(sample, ts, Zeta.D)
    den = lam @ fourier_responses(sample, ts, Zeta.D_MINUS_1)
    values = np.zeros(deltas.shape)
    trimmed = 0
    for m in range(nodes.shape[0]):
        if mixing[m] == 0.0 or node_weights[m] == 0.0:
            continue
        curve = _ucdite_from_transforms(num[m], den[m], ts, dc, deltas)
        trimmed += int(curve.fully_trimmed)
        values += node_weights[m] * mixing[m] * curve.values
    mass = compensated_sum(node_weights * mixing)
    LOGGER.debug("f_delta mixture nodes=%s trimmed=%s mass=%.4f", nodes.shape[0], trimmed, mass)
    return FDeltaCurve(deltas, values, trimmed, mass)


def estimate_f_delta(
    sample: Sample,
    est_cfg: EstimatorConfig,
    dc: DeconvConfig,
    delta: float,
    box: Optional[Box] = None,
    *,
    weighting: str = "ate",
    density: Optional[GammaFn] = None,
) -> float:
    curve = estimate_f_delta_curve(sample, est_cfg, dc, [delta], box, weighting=weighting, density=density)
    return float(curve.values[0])


def prob_positive_effect(curve: FDeltaCurve) -> float:
    """Trapezoid integral of the effect density over the part of the delta grid above zero."""
    deltas, values = curve.deltas, curve.values
    keep = deltas >= 0.0
    if np.count_nonzero(keep) < 2:
        raise EstimationError("invalid_input", "delta grid needs at least two nonnegative points")
    return compensated_sum(trapezoid_weights(deltas[keep]) * values[keep])
