"""Partial-identification bounds and the conditional variance of the effect."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import Box, EstimatorConfig
from .base import EstimationError, GridFunction2D, Sample, Zeta
from .estimators import (
    DEFAULT_DENSITY_FLOOR_SHARE,
    RadonPipeline,
    box_quadrature,
    default_y_grid,
    estimate_ate,
    grid_nodes,
    masked_ratio,
)

LOGGER = logging.getLogger("rc_treatment_effects.bounds")

_SLACK = 1e-12
CROSS_FIT_FOLDS = 2


@dataclass(frozen=True, eq=False)
class ConditionalPartialCdf:
    """G_j(y, gamma) = F_{Y_j | coefficients}(y | gamma) f(gamma) on a y-grid and weighted gamma nodes."""

    y_grid: np.ndarray
    gamma_weights: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        y_grid = np.asarray(self.y_grid, dtype=float)
        weights = np.asarray(self.gamma_weights, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if y_grid.ndim != 1 or y_grid.size < 2 or np.any(np.diff(y_grid) <= 0):
            raise EstimationError("invalid_input", "y-grid must be strictly increasing with >= 2 points")
        if values.shape != (y_grid.size, weights.size):
            raise EstimationError("grid_mismatch", "partial CDF values must have shape (n_y, n_gamma)")
        object.__setattr__(self, "y_grid", y_grid)
        object.__setattr__(self, "gamma_weights", weights)
        object.__setattr__(self, "values", values)

    def shifted(self, delta: float) -> np.ndarray:
        """G(y - delta, gamma) on the y-grid: zero below the grid, last value above it."""
        target = self.y_grid - delta
        out = np.empty_like(self.values)
        for k in range(self.values.shape[1]):
            out[:, k] = np.interp(target, self.y_grid, self.values[:, k], left=0.0, right=self.values[-1, k])
        return out

    def marginal(self) -> np.ndarray:
        """Integrated CDF F_{Y_j}(y) = sum over gamma nodes of weight * G(y, gamma)."""
        return self.values @ self.gamma_weights

    def rearranged(self) -> "ConditionalPartialCdf":
        return ConditionalPartialCdf(
            self.y_grid, self.gamma_weights, np.clip(np.sort(self.values, axis=0), 0.0, None)
        )

    def compatible(self, other: "ConditionalPartialCdf") -> bool:
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.y_grid, other.y_grid)
            and np.array_equal(self.gamma_weights, other.gamma_weights)
        )


def makarov_bounds_avg(G0: ConditionalPartialCdf, G1: ConditionalPartialCdf, delta: float) -> Tuple[float, float]:
    """Averaged Makarov bounds on F_Delta(delta) from the conditional partial CDFs."""
    if not G0.compatible(G1):
        raise EstimationError("grid_mismatch", "partial CDFs must share their y-grid and gamma nodes")
    diff = G1.values - G0.shifted(delta)
    low = float(G1.gamma_weights @ np.max(np.maximum(diff, 0.0), axis=0))
    high = 1.0 + float(G1.gamma_weights @ np.min(np.minimum(diff, 0.0), axis=0))
    low = min(max(low, 0.0), 1.0)
    high = min(max(high, low), 1.0)
    return low, high


def makarov_bounds_uncond(
    y_grid: np.ndarray, F0: np.ndarray, F1: np.ndarray, delta: float
) -> Tuple[float, float]:
    """Classical Makarov bounds from the two marginal CDFs on a shared y-grid."""
    y_grid = np.asarray(y_grid, dtype=float)
    F0 = np.asarray(F0, dtype=float)
    F1 = np.asarray(F1, dtype=float)
    if F0.shape != y_grid.shape or F1.shape != y_grid.shape:
        raise EstimationError("grid_mismatch", "marginal CDFs must match the y-grid")
    shifted = np.interp(y_grid - delta, y_grid, F0, left=0.0, right=F0[-1])
    diff = F1 - shifted
    low = min(max(float(np.max(diff)), 0.0), 1.0)
    high = min(max(1.0 + min(float(np.min(diff)), 0.0), low), 1.0)
    return low, high


def makarov_bounds_curve(
    G0: ConditionalPartialCdf,
    G1: ConditionalPartialCdf,
    deltas: Sequence[float],
) -> pd.DataFrame:
    """Averaged and unconditional Makarov bounds over a delta grid."""
    F0, F1 = G0.marginal(), G1.marginal()
    rows = []
    for delta in deltas:
        low, high = makarov_bounds_avg(G0, G1, float(delta))
        u_low, u_high = makarov_bounds_uncond(G0.y_grid, F0, F1, float(delta))
        rows.append({"delta": float(delta), "low": low, "high": high, "uncond_low": u_low, "uncond_high": u_high})
    return pd.DataFrame(rows, columns=["delta", "low", "high", "uncond_low", "uncond_high"])


def frechet_bounds(F0_at_y0: float, F1_at_y1: float) -> Tuple[float, float]:
    """Frechet-Hoeffding bounds on P(Y0 <= y0, Y1 <= y1)."""
    for value in (F0_at_y0, F1_at_y1):
        if not (-_SLACK <= value <= 1.0 + _SLACK):
            raise EstimationError("invalid_input", f"marginal probabilities must lie in [0, 1], got {value!r}")
    return max(F0_at_y0 + F1_at_y1 - 1.0, 0.0), min(F0_at_y0, F1_at_y1)


@dataclass(frozen=True)
class VarianceMoments:
    """Grid integrals entering the variance inequality.

    ate: integral for response Y; cross: for (1 - 2D) Y^2; m0: for (D - 1) Y^2
    (the second moment of Y0); m1: for D Y^2 (the second moment of Y1).
    """

    ate: float
    cross: float
    m0: float
    m1: float
    var_delta: float


class VarianceBoundCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def variance_bound_check(moments: VarianceMoments) -> VarianceBoundCheck:
    """(Var + ATE^2 + cross)^2 against 4 m0 m1."""
    lhs = (moments.var_delta + moments.ate**2 + moments.cross) ** 2
    rhs = 4.0 * moments.m0 * moments.m1
    holds = lhs <= rhs
    if not holds:
        LOGGER.info("Variance inequality violated lhs=%.6g rhs=%.6g", lhs, rhs)
    return VarianceBoundCheck(lhs, rhs, holds)


def variance_bounds(m0: float, m1: float, ate: float) -> Tuple[float, float]:
    """Interval for Var(Delta) implied by |E[Y0 Y1]| <= sqrt(m0 m1)."""
    if m0 < 0 or m1 < 0:
        raise EstimationError("invalid_input", "second moments must be nonnegative")
    root = 2.0 * math.sqrt(m0 * m1)
    low = max(m0 + m1 - root - ate**2, 0.0)
    high = max(m0 + m1 + root - ate**2, 0.0)
    return low, high


def estimate_partial_cdfs(
    sample: Sample,
    cfg: EstimatorConfig,
    y_grid: Optional[np.ndarray] = None,
    *,
    box: Optional[Box] = None,
    gamma_grid: Tuple[int, int] = (25, 25),
) -> Tuple[ConditionalPartialCdf, ConditionalPartialCdf]:
    """Estimated G0, G1 on a coarse gamma-grid, rearranged in y and clipped at zero."""
    sample.require_treatment_variation()
    y_grid = np.sort(np.asarray(y_grid if y_grid is not None else default_y_grid(sample), dtype=float))
    nodes, weights = box_quadrature(box or cfg.box, gamma_grid)
    lam = RadonPipeline(sample, cfg).functional(nodes)
    order = np.argsort(sample.y, kind="stable")
    positions = np.searchsorted(sample.y[order], y_grid, side="right")
    out = []
    for zeta in (Zeta.D_MINUS_1, Zeta.D):
        signed = lam[:, order] * zeta.apply(sample.d)[order][None, :]
        cums = np.concatenate([np.zeros((nodes.shape[0], 1)), np.cumsum(signed, axis=1)], axis=1)
        values = cums[:, positions].T
        out.append(ConditionalPartialCdf(y_grid, weights, values).rearranged())
    return out[0], out[1]


@dataclass(frozen=True)
class UcvateParts:
    density: GridFunction2D
    ucate_times_f: GridFunction2D
    ucate: GridFunction2D
    ucvate_times_f: GridFunction2D
    ucvate: GridFunction2D
    dens_floor: float
    ucate_times_f_folds: Optional[Tuple[GridFunction2D, GridFunction2D]] = None

    def variance(self, box: Optional[Box] = None) -> float:
        """Var(Delta) over ``box`` with the cross-fitted spread term."""
        ate = estimate_ate(self.ucate_times_f, box)
        return variance_decomposition(
            self.ucvate_times_f, self.ucate, self.density, ate, box, ucate_times_f_folds=self.ucate_times_f_folds
        )


def _fold_evaluations(sample: Sample, cfg: EstimatorConfig, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pipeline of D, Y, Y^2 and (1 - 2D) Y on the two halves of the sample.

    Observations are assigned to halves by parity of their index.
    """
    parity = np.arange(sample.n) % CROSS_FIT_FOLDS
    out = []
    for fold in range(CROSS_FIT_FOLDS):
        part = sample.restrict(parity == fold)
        part.require_treatment_variation()
        y = part.y
        d = part.d.astype(float)
        out.append(RadonPipeline(part, cfg).evaluate(np.column_stack([d, y, y * y, (1.0 - 2.0 * d) * y]), nodes))
    return out[0], out[1]


def estimate_ucvate_parts(sample: Sample, cfg: EstimatorConfig = EstimatorConfig()) -> UcvateParts:
    """UCVATE*f = P(Y^2) + P(Y) P((1 - 2D) Y) / f, products taken across the two halves of the sample.

    Linear terms and the density average the halves. Each product pairs the two halves so the
    estimation noise of one factor is independent of the other's.
    """
    sample.require_treatment_variation()
    if sample.n < 2 * CROSS_FIT_FOLDS:
        raise EstimationError("invalid_sample", f"cross-fitting needs at least {2 * CROSS_FIT_FOLDS} observations")
    first, second = _fold_evaluations(sample, cfg, grid_nodes(cfg.box, cfg.grid_res))
    values = 0.5 * (first + second)
    density = np.maximum(values[:, 0], 0.0)
    floor = cfg.dens_floor if cfg.dens_floor is not None else DEFAULT_DENSITY_FLOOR_SHARE * float(density.max())
    ucate, mask = masked_ratio(values[:, 1], density, floor)
    safe = np.where(mask, 1.0, density)
    product = 0.5 * (first[:, 1] * second[:, 3] + second[:, 1] * first[:, 3])
    ucvate_f = np.where(mask, 0.0, values[:, 2] + product / safe)
    ucvate = np.where(mask, 0.0, ucvate_f / safe)
    shape = tuple(cfg.grid_res)
    grid_mask = mask.reshape(shape)
    LOGGER.debug("UCVATE grid masked=%s of %s floor=%.4g", int(mask.sum()), mask.size, floor)
    return UcvateParts(
        density=GridFunction2D(cfg.box, density.reshape(shape)),
        ucate_times_f=GridFunction2D(cfg.box, values[:, 1].reshape(shape)),
        ucate=GridFunction2D(cfg.box, ucate.reshape(shape), grid_mask),
        ucvate_times_f=GridFunction2D(cfg.box, ucvate_f.reshape(shape), grid_mask),
        ucvate=GridFunction2D(cfg.box, ucvate.reshape(shape), grid_mask),
        dens_floor=floor,
        ucate_times_f_folds=(
            GridFunction2D(cfg.box, first[:, 1].reshape(shape)),
            GridFunction2D(cfg.box, second[:, 1].reshape(shape)),
        ),
    )


def estimate_ucvate(sample: Sample, cfg: EstimatorConfig = EstimatorConfig()) -> GridFunction2D:
    """Conditional variance of the effect, masked where the density is below the floor."""
    return estimate_ucvate_parts(sample, cfg).ucvate


def variance_decomposition(
    ucvate_times_f: GridFunction2D,
    ucate: GridFunction2D,
    density: GridFunction2D,
    ate: float,
    box: Optional[Box] = None,
    *,
    ucate_times_f_folds: Optional[Tuple[GridFunction2D, GridFunction2D]] = None,
) -> float:
    """Var(Delta) = int UCVATE f + int (UCATE - ATE)^2 f over the unmasked part of the box.

    With ``ucate_times_f_folds`` the square is replaced by the product of the two
    halves' (UCATE - ATE) f over f.
    """
    f = density.values.real
    if ucate_times_f_folds is None:
        spread_values = (ucate.values.real - ate) ** 2 * f
    else:
        first, second = (fold.values.real - ate * f for fold in ucate_times_f_folds)
        spread_values = first * second / np.where(ucate.active(), f, 1.0)
    spread = GridFunction2D(ucate.box, spread_values, ucate.mask)
    return float(ucvate_times_f.integrate(box)) + float(spread.integrate(box))


def estimate_variance_moments(
    sample: Sample,
    cfg: EstimatorConfig,
    box: Optional[Box] = None,
    *,
    var_delta: Optional[float] = None,
) -> VarianceMoments:
    """Box integrals of the pipeline for Y, (1 - 2D) Y^2, (D - 1) Y^2 and D Y^2.

    Var(Delta) comes from the variance decomposition unless supplied.
    """
    sample.require_treatment_variation()
    box = box or cfg.box
    y = sample.y
    d = sample.d.astype(float)
    nodes, weights = box_quadrature(box, cfg.grid_res)
    lam = RadonPipeline(sample, cfg).functional(nodes, weights)
    responses = np.column_stack([y, (1.0 - 2.0 * d) * y * y, (d - 1.0) * y * y, d * y * y])
    ate, cross, m0, m1 = (float(value) for value in lam @ responses)
    if var_delta is None:
        var_delta = estimate_ucvate_parts(sample, cfg).variance(box)
    return VarianceMoments(ate=ate, cross=cross, m0=m0, m1=m1, var_delta=float(var_delta))
