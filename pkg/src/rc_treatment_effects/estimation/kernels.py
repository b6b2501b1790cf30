"""Smoothing functions and the Radon-inversion kernels K_T and K~_T."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from ..config import ConfigError
from .base import EstimationError

LOGGER = logging.getLogger("rc_treatment_effects.kernels")

ArrayLike = Union[float, np.ndarray]

# Above this value of |T u| the Simpson panel count grows with |T u|.
_OSCILLATION_THRESHOLD = 50.0
_PANEL_BUCKET = 64
_CHUNK_ELEMENTS = 1 << 22


def _like(x: ArrayLike, values: np.ndarray) -> ArrayLike:
    if np.ndim(x) == 0:
        return float(values)
    return values


class SmoothingKind(str, Enum):
    BUMP_PSI0 = "bump_psi0"
    INDICATOR = "indicator"


def eval_psi0(x: ArrayLike) -> ArrayLike:
    """Standard bump exp(1 - 1/(1 - x^2)) on (-1, 1), zero elsewhere."""
    arr = np.asarray(x, dtype=float)
    out = np.zeros_like(arr)
    inside = np.abs(arr) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - arr[inside] ** 2))
    return _like(x, out)


def eval_indicator(x: ArrayLike) -> ArrayLike:
    arr = np.asarray(x, dtype=float)
    return _like(x, (np.abs(arr) <= 1.0).astype(float))


@dataclass(frozen=True)
class SmoothingFunction:
    """A compactly supported smoothing function on [-1, 1]."""

    kind: SmoothingKind = SmoothingKind.BUMP_PSI0

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", SmoothingKind(self.kind))
        except ValueError as exc:
            raise ConfigError(f"unknown smoothing function {self.kind!r}") from exc

    @classmethod
    def from_name(cls, name: Union[str, "SmoothingFunction"]) -> "SmoothingFunction":
        if isinstance(name, SmoothingFunction):
            return name
        return cls(name)  # type: ignore[arg-type]

    def __call__(self, x: ArrayLike) -> ArrayLike:
        if self.kind is SmoothingKind.BUMP_PSI0:
            return eval_psi0(x)
        return eval_indicator(x)


@lru_cache(maxsize=1)
def _psi0_mass() -> float:
    value, _ = integrate.quad(eval_psi0, -1.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    return float(value)


@lru_cache(maxsize=4096)
def _taper_scalar(x: float) -> float:
    x = abs(x)
    if x <= 1.0:
        return 1.0
    if x >= 2.0:
        return 0.0
    partial, _ = integrate.quad(eval_psi0, -1.0, 2.0 * x - 3.0, epsabs=1e-13, epsrel=1e-13)
    return max(0.0, 1.0 - partial / _psi0_mass())


def smooth_taper(x: ArrayLike) -> ArrayLike:
    """Smooth nonincreasing taper: 1 on [0, 1], 0 from 2 on, built from psi0."""
    arr = np.asarray(x, dtype=float)
    out = np.array([_taper_scalar(float(value)) for value in arr.ravel()]).reshape(arr.shape)
    return _like(x, out)


@dataclass(frozen=True)
class RadonKernelSpec:
    """Cutoff, dimension and smoothing of the regularized Radon inverse."""

    T: float
    L: int = 2
    psi: SmoothingFunction = field(default_factory=SmoothingFunction)
    quad_points: int = 512

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ConfigError("kernel cutoff T must be > 0")
        if self.L < 1:
            raise ConfigError("kernel dimension L must be >= 1")
        if self.quad_points < 64:
            raise ConfigError("kernel quad_points must be >= 64")
        object.__setattr__(self, "psi", SmoothingFunction.from_name(self.psi))

    @property
    def scale(self) -> float:
        return 2.0 * (2.0 * math.pi) ** (-self.L)


def _panel_count(abs_x: np.ndarray, quad_points: int) -> np.ndarray:
    base = quad_points + (quad_points % 2)
    grown = np.ceil(abs_x * quad_points / _OSCILLATION_THRESHOLD / _PANEL_BUCKET) * _PANEL_BUCKET
    panels = np.where(abs_x > _OSCILLATION_THRESHOLD, np.maximum(grown, base), base)
    return panels.astype(np.int64)


@lru_cache(maxsize=256)
def _simpson_rule(panels: int, power: int, kind: SmoothingKind) -> Tuple[np.ndarray, np.ndarray]:
    r = np.linspace(0.0, 1.0, panels + 1)
    weights = np.full(panels + 1, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    weights *= (1.0 / panels) / 3.0
    psi = SmoothingFunction(kind)
    return r, weights * r**power * np.asarray(psi(r))


def unit_moment(x: ArrayLike, power: int, psi: SmoothingFunction, quad_points: int, trig: str) -> ArrayLike:
    """Simpson value of int_0^1 trig(x r) r^power psi(r) dr, with exact parity in x."""
    arr = np.asarray(x, dtype=float)
    flat = arr.ravel()
    abs_x = np.abs(flat)
    out = np.empty_like(abs_x)
    panels = _panel_count(abs_x, quad_points)
    fn = np.cos if trig == "cos" else np.sin
    for count in np.unique(panels):
        idx = np.nonzero(panels == count)[0]
        r, weighted = _simpson_rule(int(count), power, psi.kind)
        step = max(1, _CHUNK_ELEMENTS // r.size)
        for start in range(0, idx.size, step):
            part = idx[start : start + step]
            out[part] = fn(np.outer(abs_x[part], r)) @ weighted
    if trig == "sin":
        out *= np.sign(flat)
    return _like(x, out.reshape(arr.shape))


def eval_K(spec: RadonKernelSpec, u: ArrayLike) -> ArrayLike:
    """K_T(u) = 2 (2 pi)^(-L) int_0^T cos(t u) t^(L-1) psi(t/T) dt."""
    moment = unit_moment(np.asarray(u, dtype=float) * spec.T, spec.L - 1, spec.psi, spec.quad_points, "cos")
    return _like(u, spec.scale * spec.T**spec.L * np.asarray(moment))


def eval_Ktilde(spec: RadonKernelSpec, u: ArrayLike) -> ArrayLike:
    """K~_T(u) = -2 (2 pi)^(-L) int_0^T sin(t u) t^L psi(t/T) dt, the derivative of K_T."""
    moment = unit_moment(np.asarray(u, dtype=float) * spec.T, spec.L, spec.psi, spec.quad_points, "sin")
    return _like(u, -spec.scale * spec.T ** (spec.L + 1) * np.asarray(moment))


def truncate(tau: float, x: ArrayLike) -> ArrayLike:
    """Clip x to [-tau, tau]; complex values are returned unchanged."""
    if not tau > 0:
        raise EstimationError("invalid_input", "truncation level must be > 0")
    if np.iscomplexobj(x):
        return x
    return _like(x, np.clip(np.asarray(x, dtype=float), -tau, tau))


def eval_deconv_kernel(kind: Union[str, SmoothingFunction], t: ArrayLike) -> ArrayLike:
    """Frequency-domain smoothing kernel K of the deconvolution step."""
    return SmoothingFunction.from_name(kind)(t)


class KernelTable:
    """Tabulated unit-cutoff kernels, rescaled to any T by the scaling identities."""

    def __init__(
        self,
        *,
        L: int = 2,
        psi: SmoothingFunction = SmoothingFunction(),
        quad_points: int = 512,
        x_max: float = 256.0,
        step: float = 1.0 / 128.0,
    ) -> None:
        self.L = L
        self.psi = psi
        self.quad_points = quad_points
        self.x_max = x_max
        self._x = np.arange(0.0, x_max + step / 2, step)
        # The cos moment is even and the sin moment odd in x, which fixes the left end conditions.
        self._cos = CubicSpline(
            self._x, np.asarray(unit_moment(self._x, L - 1, psi, quad_points, "cos")), bc_type=((1, 0.0), "not-a-knot")
        )
        self._sin = CubicSpline(
            self._x, np.asarray(unit_moment(self._x, L, psi, quad_points, "sin")), bc_type=((2, 0.0), "not-a-knot")
        )
        self._scale = 2.0 * (2.0 * math.pi) ** (-L)
        LOGGER.debug("Built kernel table L=%s psi=%s nodes=%s", L, psi.kind.value, self._x.size)

    def _lookup(self, x: np.ndarray, trig: str) -> np.ndarray:
        abs_x = np.abs(x)
        spline = self._cos if trig == "cos" else self._sin
        far = abs_x > self.x_max
        out = spline(np.where(far, 0.0, abs_x))
        if np.any(far):
            power = self.L - 1 if trig == "cos" else self.L
            out[far] = np.asarray(unit_moment(abs_x[far], power, self.psi, self.quad_points, trig))
        if trig == "sin":
            out *= np.sign(x)
        return out

    def K(self, T: float, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self._scale * T**self.L * self._lookup(T * u, "cos")

    def Ktilde(self, T: float, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return -self._scale * T ** (self.L + 1) * self._lookup(T * u, "sin")


_TABLES: Dict[Tuple[int, SmoothingKind, int], KernelTable] = {}


def kernel_table(L: int, psi: Union[str, SmoothingFunction], quad_points: int = 512) -> KernelTable:
    """Process-wide cached KernelTable; built once and read-only thereafter."""
    psi = SmoothingFunction.from_name(psi)
    key = (L, psi.kind, quad_points)
    table = _TABLES.get(key)
    if table is None:
        table = KernelTable(L=L, psi=psi, quad_points=quad_points)
        _TABLES[key] = table
    return table
