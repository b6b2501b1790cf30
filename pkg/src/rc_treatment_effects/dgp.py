"""Simulation designs and their analytic ground truths."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special, stats

from .config import DgpSpec
from .estimation.base import EstimationError, Sample
from .estimation.bounds import VarianceMoments

LOGGER = logging.getLogger("rc_treatment_effects.dgp")

ArrayLike = Union[float, np.ndarray]

COEF_MEAN = np.array([1.0, -0.5])
ANGLE_MEAN = math.pi / 2.0
ANGLE_VAR = math.pi**2 / 16.0
V_MEAN = -0.2
V_SD = 2.0
EPS0_VAR = 2.0
EPS1_VAR = 1.0
EPS_DELTA_VAR = 1.0
SCALAR_V_SD = 2.0
SCALAR_NOISE_SD = 0.5


def sample_truncated_gaussian(
    mean: float,
    var: float,
    lo: float,
    hi: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> ArrayLike:
    """Inverse-CDF draws from N(mean, var) restricted to [lo, hi]."""
    if not lo < hi or not var > 0:
        raise EstimationError("degenerate_interval", "truncated Gaussian needs lo < hi and var > 0")
    sd = math.sqrt(var)
    a, b = (lo - mean) / sd, (hi - mean) / sd
    # Work in the lower tail, where ndtr keeps its relative accuracy.
    sign = 1.0
    if a > 0:
        a, b, sign = -b, -a, -1.0
    cdf_a, cdf_b = special.ndtr(a), special.ndtr(b)
    if not cdf_b > cdf_a:
        raise EstimationError(
            "degenerate_interval",
            f"truncation interval [{lo}, {hi}] carries no numerical mass under N({mean}, {var})",
        )
    u = rng.uniform(cdf_a, cdf_b, size=size)
    z = sign * special.ndtri(u)
    draws = np.clip(mean + sd * z, lo, hi)
    return float(draws) if size is None else draws


@dataclass(frozen=True)
class SimulationDraw:
    """A generated sample together with the latent coefficients and both potential outcomes."""

    sample: Sample
    gamma: np.ndarray
    theta: np.ndarray
    y0: np.ndarray
    y1: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.y1 - self.y0


def simulate(spec: DgpSpec) -> SimulationDraw:
    """Draw one sample of ``spec`` and keep its latent draws."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    w = rng.standard_normal((n, 4))
    if spec.variant == "scalar_L1":
        gamma = w[:, 0]
        theta = w[:, 1]
        angle = np.full(n, math.pi / 2.0)
        v = rng.normal(0.0, SCALAR_V_SD, size=n)
        y0 = 0.5 * theta + SCALAR_NOISE_SD * w[:, 2]
        y1 = theta + SCALAR_NOISE_SD * w[:, 3]
        d = (theta < v).astype(np.int8)
        b = None
    else:
        gamma = COEF_MEAN[0] + w[:, 0]
        theta = COEF_MEAN[1] + w[:, 1]
        eps0 = math.sqrt(EPS0_VAR) * w[:, 2]
        eps1 = math.sqrt(EPS1_VAR) * w[:, 3]
        angle = sample_truncated_gaussian(ANGLE_MEAN, ANGLE_VAR, 0.0, math.pi, rng, size=n)
        v = rng.normal(V_MEAN, V_SD, size=n)
        y0 = 1.0 + 1.5 * gamma + theta + eps0
        if spec.variant == "independent":
            eps_delta = math.sqrt(EPS_DELTA_VAR) * rng.standard_normal(n)
            y1 = y0 + 2.0 + gamma - 2.0 * theta + eps_delta
        elif spec.variant == "constant_delta":
            y1 = y0 + spec.delta_constant
        else:
            y1 = 3.0 + 2.5 * gamma - theta + eps1
        b = None
        selection_theta = theta
        if spec.variant == "binary":
            b = (rng.random(n) < spec.b_prob).astype(np.int8)
            selection_theta = theta + spec.alpha * b
        d = (np.cos(angle) * gamma + np.sin(angle) * selection_theta < v).astype(np.int8)
    y = np.where(d == 1, y1, y0)
    sample = Sample(y=y, d=d, phi_angle=angle, v=v, b=b)
    LOGGER.debug("Simulated variant=%s n=%s seed=%s treated=%.4f", spec.variant, n, spec.seed, d.mean())
    return SimulationDraw(sample=sample, gamma=gamma, theta=theta, y0=y0, y1=y1)


def generate(spec: DgpSpec) -> Sample:
    return simulate(spec).sample


def _coef_mean(variant: str) -> np.ndarray:
    return np.zeros(2) if variant == "scalar_L1" else COEF_MEAN


def true_density_gamma(gamma: ArrayLike, theta: ArrayLike, variant: str = "baseline") -> ArrayLike:
    """Density of the selection coefficients: N(mean, I)."""
    mu = _coef_mean(variant)
    value = np.exp(-0.5 * ((np.asarray(gamma) - mu[0]) ** 2 + (np.asarray(theta) - mu[1]) ** 2)) / (2.0 * math.pi)
    return float(value) if np.ndim(value) == 0 else value


def true_ucate(gamma: ArrayLike, theta: ArrayLike, variant: str = "baseline", delta_constant: float = 4.0) -> ArrayLike:
    gamma = np.asarray(gamma, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if variant == "constant_delta":
        value = np.full(np.broadcast(gamma, theta).shape, delta_constant)
    elif variant == "scalar_L1":
        value = 0.5 * theta + 0.0 * gamma
    else:
        value = 2.0 + gamma - 2.0 * theta
    return float(value) if np.ndim(value) == 0 else value


def true_propensity(s: np.ndarray, v: ArrayLike, variant: str = "baseline", b: int = 0, alpha: float = 1.0) -> ArrayLike:
    """P(D = 1 | S = s, V = v) = Phi((v - s'mu) / |s|)."""
    s = np.asarray(s, dtype=float)
    mu = _coef_mean(variant).copy()
    if variant == "binary":
        mu[1] += alpha * b
    value = special.ndtr((np.asarray(v, dtype=float) - s @ mu) / np.linalg.norm(s))
    return float(value) if np.ndim(value) == 0 else value


def _delta_variance(variant: str) -> float:
    if variant in ("baseline", "binary"):
        return 1.0 + 4.0 + EPS0_VAR + EPS1_VAR
    if variant == "independent":
        return 1.0 + 4.0 + EPS_DELTA_VAR
    if variant == "scalar_L1":
        return 0.25 + 2.0 * SCALAR_NOISE_SD**2
    raise EstimationError("invalid_input", f"the effect of variant {variant!r} has no density")


def _conditional_delta_variance(variant: str) -> float:
    if variant in ("baseline", "binary"):
        return EPS0_VAR + EPS1_VAR
    if variant == "independent":
        return EPS_DELTA_VAR
    if variant == "scalar_L1":
        return 2.0 * SCALAR_NOISE_SD**2
    raise EstimationError("invalid_input", f"the effect of variant {variant!r} has no density")


def true_ate(variant: str = "baseline", delta_constant: float = 4.0) -> float:
    if variant == "constant_delta":
        return delta_constant
    return 0.0 if variant == "scalar_L1" else 4.0


def true_f_delta(delta: ArrayLike, variant: str = "baseline") -> ArrayLike:
    """Marginal effect density: N(4, 8) in the baseline design, N(4, 6) in the independent one."""
    value = stats.norm.pdf(delta, loc=true_ate(variant), scale=math.sqrt(_delta_variance(variant)))
    return float(value) if np.ndim(value) == 0 else value


def true_f_delta_cdf(delta: ArrayLike, variant: str = "baseline") -> ArrayLike:
    value = stats.norm.cdf(delta, loc=true_ate(variant), scale=math.sqrt(_delta_variance(variant)))
    return float(value) if np.ndim(value) == 0 else value


def true_ucdite(delta: ArrayLike, gamma: float, theta: float, variant: str = "baseline") -> ArrayLike:
    """Effect density given the coefficients: N(UCATE, conditional variance)."""
    value = stats.norm.pdf(
        delta,
        loc=true_ucate(gamma, theta, variant),
        scale=math.sqrt(_conditional_delta_variance(variant)),
    )
    return float(value) if np.ndim(value) == 0 else value


def outcome_law(j: int, variant: str = "baseline", delta_constant: float = 4.0) -> Tuple[float, float]:
    """(mean, variance) of the potential outcome Y_j."""
    if variant == "scalar_L1":
        return (0.0, 0.25 + SCALAR_NOISE_SD**2) if j == 0 else (0.0, 1.0 + SCALAR_NOISE_SD**2)
    if j == 0:
        return 2.0, 1.5**2 + 1.0 + EPS0_VAR
    if variant == "independent":
        return 6.0, 2.5**2 + 1.0 + EPS0_VAR + EPS_DELTA_VAR
    if variant == "constant_delta":
        return 2.0 + delta_constant, 1.5**2 + 1.0 + EPS0_VAR
    return 6.0, 2.5**2 + 1.0 + EPS1_VAR


def true_marginal_cdf(j: int, y: ArrayLike, variant: str = "baseline") -> ArrayLike:
    mean, var = outcome_law(j, variant)
    value = special.ndtr((np.asarray(y, dtype=float) - mean) / math.sqrt(var))
    return float(value) if np.ndim(value) == 0 else value


def conditional_outcome_law(
    j: int, gamma: ArrayLike, theta: ArrayLike, variant: str = "baseline", delta_constant: float = 4.0
) -> Tuple[np.ndarray, float]:
    """(mean, variance) of Y_j given the coefficients (gamma, theta)."""
    gamma = np.asarray(gamma, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if variant == "scalar_L1":
        if j == 0:
            return 0.5 * theta + 0.0 * gamma, SCALAR_NOISE_SD**2
        return theta + 0.0 * gamma, SCALAR_NOISE_SD**2
    mean0 = 1.0 + 1.5 * gamma + theta
    if j == 0:
        return mean0, EPS0_VAR
    if variant == "independent":
        return mean0 + 2.0 + gamma - 2.0 * theta, EPS0_VAR + EPS_DELTA_VAR
    if variant == "constant_delta":
        return mean0 + delta_constant, EPS0_VAR
    return 3.0 + 2.5 * gamma - theta, EPS1_VAR


def true_partial_cdf(
    j: int, y: ArrayLike, gamma: ArrayLike, theta: ArrayLike, variant: str = "baseline"
) -> np.ndarray:
    """F_{Y_j | coefficients}(y | gamma, theta) times the coefficient density."""
    mean, var = conditional_outcome_law(j, gamma, theta, variant)
    return special.ndtr((np.asarray(y, dtype=float) - mean) / math.sqrt(var)) * true_density_gamma(
        gamma, theta, variant
    )


@lru_cache(maxsize=8)
def _selection_quadrature(variant: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes and weights over (Gamma, Theta) with P(D = 1 | Gamma, Theta) at each node."""
    z, wz = hermegauss(48)
    wz = wz / wz.sum()
    mu = _coef_mean(variant)
    gg, tt = np.meshgrid(mu[0] + z, mu[1] + z, indexing="ij")
    weights = np.outer(wz, wz)
    if variant == "scalar_L1":
        p = special.ndtr(-tt / SCALAR_V_SD)
        return gg.ravel(), tt.ravel(), np.column_stack([weights.ravel(), p.ravel()])
    x, wx = np.polynomial.legendre.leggauss(96)
    angle = 0.5 * math.pi * (x + 1.0)
    sd = math.sqrt(ANGLE_VAR)
    mass = special.ndtr((math.pi - ANGLE_MEAN) / sd) - special.ndtr(-ANGLE_MEAN / sd)
    angle_w = 0.5 * math.pi * wx * stats.norm.pdf(angle, ANGLE_MEAN, sd) / mass
    proj = np.cos(angle)[None, None, :] * gg[..., None] + np.sin(angle)[None, None, :] * tt[..., None]
    p = (special.ndtr((V_MEAN - proj) / V_SD) * angle_w).sum(axis=-1)
    return gg.ravel(), tt.ravel(), np.column_stack([weights.ravel(), p.ravel()])


def true_treated_share(variant: str = "baseline") -> float:
    """P(D = 1) by quadrature over the coefficients, the angle and V."""
    _, _, table = _selection_quadrature("baseline" if variant == "binary" else variant)
    return float(table[:, 0] @ table[:, 1])


def true_tt(variant: str = "baseline", delta_constant: float = 4.0) -> float:
    """E[Delta | D = 1] = E[UCATE p] / E[p], p the coefficient-level participation probability."""
    gg, tt, table = _selection_quadrature("baseline" if variant == "binary" else variant)
    ucate = np.asarray(true_ucate(gg, tt, variant, delta_constant))
    return float((table[:, 0] * table[:, 1]) @ ucate / (table[:, 0] @ table[:, 1]))


def true_tut(variant: str = "baseline", delta_constant: float = 4.0) -> float:
    gg, tt, table = _selection_quadrature("baseline" if variant == "binary" else variant)
    ucate = np.asarray(true_ucate(gg, tt, variant, delta_constant))
    untreated = table[:, 0] * (1.0 - table[:, 1])
    return float(untreated @ ucate / untreated.sum())


def true_variance_moments(variant: str = "baseline", delta_constant: float = 4.0) -> VarianceMoments:
    """Population values of the integrals entering the variance inequality."""
    mean0, var0 = outcome_law(0, variant, delta_constant)
    mean1, var1 = outcome_law(1, variant, delta_constant)
    m0 = var0 + mean0**2
    m1 = var1 + mean1**2
    var_delta = 0.0 if variant == "constant_delta" else _delta_variance(variant)
    return VarianceMoments(
        ate=mean1 - mean0,
        cross=-(m0 + m1),
        m0=m0,
        m1=m1,
        var_delta=var_delta,
    )
