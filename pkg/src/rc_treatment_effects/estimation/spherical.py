"""Hemispherical-transform series estimation on the unit sphere.

Observations are mapped to S = (v, cos angle, sin angle) / sqrt(1 + v^2), which lies
in the open half-sphere with positive last coordinate. Selection is D = 1{S'G > 0}
for a random direction G with positive first coordinate, so E[zeta(D) phi(Y) | S = s]
is a hemispherical transform of a function supported on that side. The transform
only sees the odd part of its argument plus half its total mass; the series below
inverts it on odd degrees.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from ..config import SeriesConfig
from .base import EstimationError, OutcomeTransform, Sample, Zeta
from .kernels import eval_indicator, smooth_taper
from .regression import density_at_observations, density_sv_many

LOGGER = logging.getLogger("rc_treatment_effects.spherical")

_UNIT_TOL = 1e-9
_WORK_ELEMENTS = 4_000_000

SphereFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SpherePoint:
    """Unit vector in R^(L+1)."""

    coords: Tuple[float, ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.coords, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise EstimationError("invalid_input", "sphere point needs at least two coordinates")
        if abs(float(np.linalg.norm(arr)) - 1.0) > _UNIT_TOL:
            raise EstimationError("invalid_input", f"sphere point must have unit norm, got {np.linalg.norm(arr)!r}")
        object.__setattr__(self, "coords", tuple(float(c) for c in arr))

    @classmethod
    def normalized(cls, vector: Sequence[float]) -> "SpherePoint":
        arr = np.asarray(vector, dtype=float)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise EstimationError("invalid_input", "cannot normalise the zero vector")
        return cls(tuple(arr / norm))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords)

    @property
    def L(self) -> int:
        return len(self.coords) - 1

    def __neg__(self) -> "SpherePoint":
        return SpherePoint(tuple(-c for c in self.coords))

    def on_boundary(self, tol: float = _UNIT_TOL) -> bool:
        """True on the great circle where the last coordinate vanishes."""
        return abs(self.coords[-1]) <= tol


def gegenbauer(n: int, nu: float, t):
    """C_n^nu(t) by the three-term recurrence."""
    if n < 0:
        raise EstimationError("invalid_input", "Gegenbauer degree must be >= 0")
    if nu <= -0.5:
        raise EstimationError("invalid_input", "Gegenbauer index must be > -1/2")
    t_arr = np.asarray(t, dtype=float)
    prev = np.ones_like(t_arr)
    if n == 0:
        return prev if np.ndim(t) else float(prev)
    cur = 2.0 * nu * t_arr
    for k in range(2, n + 1):
        prev, cur = cur, (2.0 * t_arr * (k + nu - 1.0) * cur - (k + 2.0 * nu - 2.0) * prev) / k
    return cur if np.ndim(t) else float(cur)


def gegenbauer_sum(n: int, nu: float, t):
    """C_n^nu(t) from the explicit finite sum over l <= n/2."""
    if n < 0:
        raise EstimationError("invalid_input", "Gegenbauer degree must be >= 0")
    t_arr = np.asarray(t, dtype=float)
    total = np.zeros_like(t_arr)
    for l in range(n // 2 + 1):
        coef = (-1.0) ** l * special.poch(nu, n - l) / (math.factorial(l) * math.factorial(n - 2 * l))
        total = total + coef * (2.0 * t_arr) ** (n - 2 * l)
    return total if np.ndim(t) else float(total)


def sphere_area(L: int) -> float:
    """Surface measure of the unit sphere S^L in R^(L+1)."""
    if L < 0:
        raise EstimationError("invalid_input", "sphere dimension must be >= 0")
    return 2.0 * math.pi ** ((L + 1) / 2.0) / math.gamma((L + 1) / 2.0)


def coef_h(n: int, L: int) -> float:
    """Dimension of the space of degree-n spherical harmonics on S^L."""
    if n < 0 or L < 1:
        raise EstimationError("invalid_input", "coef_h needs n >= 0 and L >= 1")
    if n + L - 1 == 0:
        return 1.0
    return (2 * n + L - 1) * math.comb(n + L - 1, n) / (n + L - 1)


def coef_lambda(n: int, L: int) -> float:
    """Eigenvalue of the hemispherical transform on odd degree n harmonics."""
    if n < 1 or n % 2 == 0:
        raise EstimationError("invalid_series", f"hemispherical eigenvalues are defined on odd degrees, got {n}")
    p = (n - 1) // 2
    numerator = math.prod(range(1, 2 * p, 2))
    denominator = math.prod(L + 2 * k for k in range(p + 1))
    return (-1.0) ** p * sphere_area(L - 1) * numerator / denominator


def _tangent_frame(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pivot = np.eye(3)[int(np.argmin(np.abs(s)))]
    e1 = np.cross(s, pivot)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(s, e1)


def sphere_quadrature(resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes (M, 3) and weights of a Gauss-Legendre x uniform-azimuth rule on S^2."""
    if resolution < 2:
        raise EstimationError("invalid_input", "sphere quadrature resolution must be >= 2")
    z, wz = np.polynomial.legendre.leggauss(resolution)
    azimuth = np.arange(2 * resolution) * (math.pi / resolution)
    zz, aa = np.meshgrid(z, azimuth, indexing="ij")
    rho = np.sqrt(1.0 - zz**2)
    nodes = np.column_stack([(rho * np.cos(aa)).ravel(), (rho * np.sin(aa)).ravel(), zz.ravel()])
    weights = np.repeat(wz * (math.pi / resolution), azimuth.size)
    return nodes, weights


def hemispherical_transform_quad(f: SphereFunction, s: SpherePoint, resolution: int = 64) -> float:
    """Integral of f over {g : s'g > 0}, Gauss-Legendre in s'g and uniform in azimuth."""
    if resolution < 32:
        raise EstimationError("invalid_input", "hemispherical quadrature resolution must be >= 32")
    if s.L != 2:
        raise EstimationError("unsupported_dimension", "hemispherical quadrature is implemented on S^2")
    centre = s.array
    e1, e2 = _tangent_frame(centre)
    x, wx = np.polynomial.legendre.leggauss(resolution)
    t = 0.5 * (x + 1.0)
    wt = 0.5 * wx
    azimuth = np.arange(2 * resolution) * (math.pi / resolution)
    tt, aa = np.meshgrid(t, azimuth, indexing="ij")
    rho = np.sqrt(1.0 - tt**2)[..., None]
    points = (
        tt[..., None] * centre
        + rho * np.cos(aa)[..., None] * e1
        + rho * np.sin(aa)[..., None] * e2
    ).reshape(-1, 3)
    weights = np.repeat(wt * (math.pi / resolution), azimuth.size)
    return float(weights @ np.asarray(f(points), dtype=float))


def sample_to_sphere(phi_angle: np.ndarray, v: np.ndarray) -> np.ndarray:
    norm = np.sqrt(1.0 + np.asarray(v) ** 2)
    return np.column_stack([v / norm, np.cos(phi_angle) / norm, np.sin(phi_angle) / norm])


def sphere_to_sample(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rho = np.hypot(points[:, 1], points[:, 2])
    return np.arctan2(points[:, 2], points[:, 1]), points[:, 0] / rho


def _jacobian(v: np.ndarray) -> np.ndarray:
    return (1.0 + v * v) ** 1.5


class SphereSample(NamedTuple):
    points: np.ndarray
    y: np.ndarray
    d: np.ndarray
    density: np.ndarray

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    def responses(self, phi_fn: OutcomeTransform, zeta: Zeta) -> np.ndarray:
        return np.asarray(phi_fn(self.y)) * Zeta(zeta).apply(self.d)


def to_sphere(sample: Sample, bandwidths: Optional[Sequence[float]] = None) -> SphereSample:
    """Sphere coordinates of every observation with the plug-in density f_S at each of them."""
    density = density_at_observations(sample, bandwidths) * _jacobian(sample.v)
    return SphereSample(sample_to_sphere(sample.phi_angle, sample.v), sample.y, sample.d, density)


def density_sphere(sample: Sample, points: np.ndarray, bandwidths: Optional[Sequence[float]] = None) -> np.ndarray:
    """Plug-in f_S at sphere points, zero off the half-sphere carrying the data."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    inside = points[:, 2] > 0
    out = np.zeros(points.shape[0])
    if inside.any():
        phi, v = sphere_to_sample(points[inside])
        out[inside] = density_sv_many(sample, np.column_stack([phi, v]), bandwidths) * _jacobian(v)
    return out


def _taper(cfg: SeriesConfig, n: int, cutoff: int) -> float:
    x = n / cutoff
    if cfg.taper == "indicator":
        return float(eval_indicator(x))
    return float(smooth_taper(x))


def series_coefficients(cfg: SeriesConfig, L: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """Odd degrees 2p+1, p < T, with their tapered inverse-eigenvalue weights."""
    if cfg.T < 1:
        raise EstimationError("invalid_series", "series truncation must be >= 1")
    nu = (L - 1) / 2.0
    degrees = np.arange(cfg.T) * 2 + 1
    weights = np.array(
        [
            _taper(cfg, int(n), 2 * cfg.T) * coef_h(int(n), L) / (coef_lambda(int(n), L) * gegenbauer(int(n), nu, 1.0))
            for n in degrees
        ]
    )
    return degrees, weights / sphere_area(L)


def estimate_odd_part(
    sample_sphere: SphereSample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    mean_phi_Yj: float,
    cfg: SeriesConfig,
    gamma,
) -> np.ndarray:
    """Odd part of E[phi(Y_j) | G = g] f_G(g) at one or many sphere points.

    The series inverts the hemispherical transform on odd degrees applied to
    E[zeta(D) phi(Y) | S = s] - mean/2. Its projections over the whole sphere are
    twice those over the half carrying the data, so each observation enters as
    2 zeta(d_i) phi(y_i) - mean over the plug-in density of S.
    """
    degrees, weights = series_coefficients(cfg)
    points = gamma.array if isinstance(gamma, SpherePoint) else np.asarray(gamma, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    terms = 2.0 * sample_sphere.responses(phi_fn, zeta) - mean_phi_Yj
    terms = terms / np.maximum(sample_sphere.density, cfg.m_floor) / sample_sphere.n
    out = np.zeros(points.shape[0], dtype=np.result_type(terms.dtype, np.float64))
    chunk = max(1, _WORK_ELEMENTS // max(sample_sphere.n, 1))
    for start in range(0, points.shape[0], chunk):
        cosines = np.clip(points[start : start + chunk] @ sample_sphere.points.T, -1.0, 1.0)
        basis = sum(w * special.eval_legendre(int(n), cosines) for n, w in zip(degrees, weights))
        out[start : start + chunk] = basis @ terms
    return out[0] if single else out


def reconstruct_from_odd_part(odd: np.ndarray) -> np.ndarray:
    """A function supported on one half-sphere is twice the positive part of its odd part."""
    return 2.0 * np.maximum(np.real(odd), 0.0)


def _check_boundary(direction: SpherePoint) -> None:
    if direction.L != 2 or not direction.on_boundary():
        raise EstimationError("invalid_input", "boundary direction must be a unit vector with last coordinate 0")


def _side_value(sample_sphere: SphereSample, responses: np.ndarray, at: np.ndarray, band: float, degree: int) -> float:
    near = np.linalg.norm(sample_sphere.points - at[None, :], axis=1) < band
    count = int(np.count_nonzero(near))
    if count < (1 if degree == 0 else 4):
        raise EstimationError(
            "empty_band",
            f"{count} observations within {band} of {tuple(np.round(at, 4))}",
            details={"count": count, "degree": degree},
        )
    if degree == 0:
        return float(np.real(responses[near].mean()))
    e1, e2 = _tangent_frame(at)
    offsets = sample_sphere.points[near] - at[None, :]
    design = np.column_stack([np.ones(count), offsets @ e1, offsets @ e2])
    coef, *_ = np.linalg.lstsq(design, responses[near], rcond=None)
    return float(np.real(coef[0]))


def boundary_mean(
    sample_sphere: SphereSample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    boundary_dir: SpherePoint,
    band: float,
    *,
    degree: int = 0,
) -> float:
    """Sum of the boundary limits of E[zeta(D) phi(Y) | S] at a boundary direction and its antipode.

    ``degree=0`` averages the responses in each band; ``degree=1`` fits a local
    plane in the tangent coordinates and reads off its value at the boundary.
    """
    if band <= 0:
        raise EstimationError("invalid_input", "band must be > 0")
    if degree not in (0, 1):
        raise EstimationError("invalid_input", "boundary regression degree must be 0 or 1")
    _check_boundary(boundary_dir)
    responses = sample_sphere.responses(phi_fn, zeta)
    at = boundary_dir.array
    return _side_value(sample_sphere, responses, at, band, degree) + _side_value(
        sample_sphere, responses, -at, band, degree
    )


def boundary_directions(count: int, v_range: Tuple[float, float] = (-1.5, 1.5)) -> Sequence[SpherePoint]:
    """Boundary directions (v, 1, 0) / sqrt(1 + v^2) for v spread over ``v_range``."""
    return [SpherePoint.normalized((v, 1.0, 0.0)) for v in np.linspace(v_range[0], v_range[1], count)]


def boundary_mean_pooled(
    sample_sphere: SphereSample,
    phi_fn: OutcomeTransform,
    zeta: Zeta,
    directions: Sequence[SpherePoint],
    band: float,
    *,
    degree: int = 0,
) -> float:
    """Average of boundary_mean over several boundary directions; empty bands are skipped."""
    values = []
    for direction in directions:
        try:
            values.append(boundary_mean(sample_sphere, phi_fn, zeta, direction, band, degree=degree))
        except EstimationError as exc:
            if exc.code != "empty_band":
                raise
            LOGGER.debug("Skipping boundary direction %s: %s", direction.coords, exc.message)
    if not values:
        raise EstimationError("empty_band", "every boundary band is empty")
    return float(np.mean(values))
