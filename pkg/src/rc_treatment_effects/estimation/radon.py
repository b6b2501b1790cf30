"""Hemisphere geometry and the regularized Radon-inverse operators for L = 2."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Optional, Tuple, Union

import numpy as np
from scipy import integrate, linalg

from .base import EstimationError
from .kernels import SmoothingFunction, kernel_table

LOGGER = logging.getLogger("rc_treatment_effects.radon")

# Upper bound on kernel-matrix entries materialised at once.
BLOCK_ELEMENTS = 4_000_000

KERNEL_KINDS = ("A", "B")


@dataclass(frozen=True)
class HemispherePoint:
    """Direction s = (cos phi, sin phi) on the open upper half circle."""

    angle: float

    def __post_init__(self) -> None:
        if not (0.0 < self.angle < math.pi):
            raise EstimationError("invalid_input", f"hemisphere angle must lie in (0, pi), got {self.angle!r}")

    @property
    def s(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @classmethod
    def from_vector(cls, s: np.ndarray) -> "HemispherePoint":
        s = np.asarray(s, dtype=float)
        return cls(math.atan2(s[1], s[0]))


HplaneCallable = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HplaneFunction:
    """Function of (angle, u) on H+ x [u_lo, u_hi], extended by zero outside the u-box."""

    fn: HplaneCallable
    u_lo: float = -math.inf
    u_hi: float = math.inf

    def __call__(self, phi: np.ndarray, u: np.ndarray) -> np.ndarray:
        phi, u = np.broadcast_arrays(np.asarray(phi, dtype=float), np.asarray(u, dtype=float))
        values = np.asarray(self.fn(phi, u))
        inside = (u >= self.u_lo) & (u <= self.u_hi)
        return np.where(inside, values, 0.0)

    def evaluate(self, point: HemispherePoint, u: float) -> Union[float, complex]:
        value = self(np.array([point.angle]), np.array([u]))[0]
        return complex(value) if np.iscomplexobj(value) else float(value)

    @classmethod
    def zero(cls) -> "HplaneFunction":
        return cls(lambda phi, u: np.zeros(np.broadcast(phi, u).shape))

    def __add__(self, other: "HplaneFunction") -> "HplaneFunction":
        return HplaneFunction(lambda phi, u: self(phi, u) + other(phi, u))

    def scaled(self, factor: complex) -> "HplaneFunction":
        return HplaneFunction(lambda phi, u: factor * self(phi, u))


@lru_cache(maxsize=64)
def _simpson_weights_cached(n: int, a: float, b: float) -> np.ndarray:
    x = np.linspace(a, b, n)
    weights = integrate.simpson(np.eye(n), x=x)
    weights.setflags(write=False)
    return weights


def simpson_weights(n: int, a: float, b: float) -> np.ndarray:
    """Composite Simpson weights for n equally spaced nodes on [a, b]."""
    if n < 3:
        raise EstimationError("invalid_input", "Simpson quadrature needs at least 3 nodes")
    return _simpson_weights_cached(int(n), float(a), float(b))


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor Simpson grid over angle in [0, pi] and u in [u_lo, u_hi]."""

    n_phi: int = 121
    n_u: int = 241
    u_lo: float = -10.0
    u_hi: float = 10.0

    def __post_init__(self) -> None:
        if self.n_phi < 16 or self.n_u < 16:
            raise EstimationError("invalid_input", "quadrature grid needs n_phi, n_u >= 16")
        if not self.u_lo < self.u_hi:
            raise EstimationError("invalid_input", "quadrature grid needs u_lo < u_hi")

    @classmethod
    def covering(
        cls,
        reach: float,
        *,
        spread: float = 1.0,
        n_phi: int = 121,
        n_u: int = 241,
        margin: float = 8.0,
    ) -> "QuadratureGrid":
        """Grid whose u-box contains [-reach - margin*spread, reach + margin*spread]."""
        half = abs(reach) + margin * spread
        return cls(n_phi=n_phi, n_u=n_u, u_lo=-half, u_hi=half)

    @property
    def size(self) -> int:
        return self.n_phi * self.n_u

    @property
    def phi(self) -> np.ndarray:
        return np.linspace(0.0, math.pi, self.n_phi)

    @property
    def u(self) -> np.ndarray:
        return np.linspace(self.u_lo, self.u_hi, self.n_u)

    def points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flattened (angle, u) nodes, angle-major."""
        pp, uu = np.meshgrid(self.phi, self.u, indexing="ij")
        return pp.ravel(), uu.ravel()

    def weights(self) -> np.ndarray:
        return np.outer(
            simpson_weights(self.n_phi, 0.0, math.pi),
            simpson_weights(self.n_u, self.u_lo, self.u_hi),
        ).ravel()

    def sample(self, f: HplaneFunction) -> np.ndarray:
        phi, u = self.points()
        return f(phi, u)


def radon_gaussian(mu: np.ndarray, sigma: np.ndarray, s: HemispherePoint, u: float) -> float:
    """Radon transform of the N(mu, sigma) density: the N(s'mu, s'sigma s) density at u."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    _check_covariance(sigma)
    direction = s.s
    mean = float(direction @ mu)
    var = float(direction @ sigma @ direction)
    return float(np.exp(-0.5 * (u - mean) ** 2 / var) / math.sqrt(2.0 * math.pi * var))


def _check_covariance(sigma: np.ndarray) -> None:
    if sigma.shape != (2, 2) or not np.allclose(sigma, sigma.T):
        raise EstimationError("invalid_covariance", "covariance must be a symmetric 2x2 matrix")
    try:
        linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise EstimationError("invalid_covariance", "covariance must be positive definite") from exc


def gaussian_radon_function(mu: np.ndarray, sigma: np.ndarray) -> HplaneFunction:
    """Vectorised Radon transform of a Gaussian density, as an HplaneFunction."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    _check_covariance(sigma)

    def _fn(phi: np.ndarray, u: np.ndarray) -> np.ndarray:
        c, s = np.cos(phi), np.sin(phi)
        mean = c * mu[0] + s * mu[1]
        var = c * c * sigma[0, 0] + 2.0 * c * s * sigma[0, 1] + s * s * sigma[1, 1]
        return np.exp(-0.5 * (u - mean) ** 2 / var) / np.sqrt(2.0 * math.pi * var)

    return HplaneFunction(_fn)


class RadonInverse:
    """Regularized Radon inverse on a fixed quadrature grid.

    Kind ``"A"`` integrates against K_T, kind ``"B"`` against K~_T. The operator
    is linear in the sampled values; ``apply`` accepts one column or many.
    """

    def __init__(
        self,
        grid: QuadratureGrid,
        T: float,
        *,
        kind: str = "A",
        psi: Union[str, SmoothingFunction] = "bump_psi0",
        L: int = 2,
        quad_points: int = 512,
    ) -> None:
        if L != 2:
            raise EstimationError(
                "unsupported_dimension",
                f"Radon-inverse operators are implemented for L = 2 only, got L = {L}",
            )
        if not T > 0:
            raise EstimationError("invalid_input", "Radon cutoff T must be > 0")
        if kind not in KERNEL_KINDS:
            raise EstimationError("invalid_input", f"kernel kind must be one of {KERNEL_KINDS}")
        self.grid = grid
        self.T = float(T)
        self.kind = kind
        self._table = kernel_table(L, psi, quad_points)
        phi, u = grid.points()
        self._s = np.column_stack([np.cos(phi), np.sin(phi)])
        self._u = u
        self._w = grid.weights()

    @property
    def size(self) -> int:
        return self._u.size

    def _kernel(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "A":
            return self._table.K(self.T, x)
        return self._table.Ktilde(self.T, x)

    def kernel_block(self, gammas: np.ndarray, rows: Union[slice, np.ndarray]) -> np.ndarray:
        """Quadrature-weighted kernel matrix K(s_q'gamma_m - u_q) w_q, shape (M, rows)."""
        gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
        proj = gammas @ self._s[rows].T
        return self._kernel(proj - self._u[rows][None, :]) * self._w[rows][None, :]

    def row_chunks(self, n_gammas: int) -> Iterator[slice]:
        step = max(1, BLOCK_ELEMENTS // max(1, n_gammas))
        for start in range(0, self.size, step):
            yield slice(start, min(start + step, self.size))

    def apply(self, values: np.ndarray, gammas: np.ndarray) -> np.ndarray:
        """Apply the operator to sampled values of shape (Q,) or (Q, R) at gammas (M, 2)."""
        values = np.asarray(values)
        if values.shape[0] != self.size:
            raise EstimationError("grid_mismatch", "sampled values do not match the quadrature grid")
        gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
        squeeze = values.ndim == 1
        columns = values[:, None] if squeeze else values
        dtype = np.result_type(columns.dtype, np.float64)
        out = np.zeros((gammas.shape[0], columns.shape[1]), dtype=dtype)
        for rows in self.row_chunks(gammas.shape[0]):
            active = np.any(columns[rows] != 0, axis=1)
            if not active.any():
                continue
            index = np.arange(rows.start, rows.stop)[active]
            out += self.kernel_block(gammas, index) @ columns[index]
        return out[:, 0] if squeeze else out

    def integrated_weights(self, gammas: np.ndarray, gamma_weights: np.ndarray) -> np.ndarray:
        """Row vector c with c @ values = sum_m gamma_weights[m] * apply(values, gammas)[m]."""
        gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
        gamma_weights = np.asarray(gamma_weights, dtype=float)
        out = np.zeros(self.size)
        for rows in self.row_chunks(gammas.shape[0]):
            out[rows] = gamma_weights @ self.kernel_block(gammas, rows)
        return out


def _single(
    f: HplaneFunction,
    T: float,
    gamma: np.ndarray,
    grid: QuadratureGrid,
    psi: Union[str, SmoothingFunction],
    kind: str,
    quad_points: Optional[int],
) -> Union[float, complex]:
    operator = RadonInverse(grid, T, kind=kind, psi=psi, quad_points=quad_points or 512)
    value = operator.apply(grid.sample(f), np.asarray(gamma, dtype=float)[None, :])[0]
    return complex(value) if np.iscomplexobj(value) else float(value)


def apply_AT(
    f: HplaneFunction,
    T: float,
    gamma: np.ndarray,
    grid: QuadratureGrid = QuadratureGrid(),
    psi: Union[str, SmoothingFunction] = "bump_psi0",
    *,
    quad_points: Optional[int] = None,
) -> Union[float, complex]:
    """Integral over H+ x R of K_T(s'gamma - u) f(s, u) by tensor quadrature."""
    return _single(f, T, gamma, grid, psi, "A", quad_points)


def apply_BT(
    g: HplaneFunction,
    T: float,
    gamma: np.ndarray,
    grid: QuadratureGrid = QuadratureGrid(),
    psi: Union[str, SmoothingFunction] = "bump_psi0",
    *,
    quad_points: Optional[int] = None,
) -> Union[float, complex]:
    """Integral over H+ x R of K~_T(s'gamma - u) g(s, u) by tensor quadrature."""
    return _single(g, T, gamma, grid, psi, "B", quad_points)
