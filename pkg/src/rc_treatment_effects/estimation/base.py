"""Shared data types for the estimation modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from ..config import Box

OutcomeTransform = Callable[[np.ndarray], np.ndarray]


class EstimationError(Exception):
    """Standard error raised by the estimation modules."""

    def __init__(self, code: str, message: str, *, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.details = details or {}


class Zeta(str, Enum):
    """Treatment weighting ς(D) multiplying the outcome transform."""

    D = "D"
    D_MINUS_1 = "D_minus_1"
    ONE = "one"
    TWO_D_MINUS_1 = "2D_minus_1"
    ONE_MINUS_2D = "1_minus_2D"

    def apply(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self is Zeta.D:
            return d
        if self is Zeta.D_MINUS_1:
            return d - 1.0
        if self is Zeta.ONE:
            return np.ones_like(d)
        if self is Zeta.TWO_D_MINUS_1:
            return 2.0 * d - 1.0
        return 1.0 - 2.0 * d


def identity(y: np.ndarray) -> np.ndarray:
    return np.asarray(y, dtype=float)


def constant_one(y: np.ndarray) -> np.ndarray:
    return np.ones_like(np.asarray(y, dtype=float))


def square(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y * y


def indicator_le(threshold: float) -> OutcomeTransform:
    """Outcome transform y -> 1{y <= threshold}."""

    def _indicator(y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) <= threshold).astype(float)

    return _indicator


def fourier(t: float) -> OutcomeTransform:
    """Outcome transform y -> exp(i t y)."""

    def _fourier(y: np.ndarray) -> np.ndarray:
        return np.exp(1j * t * np.asarray(y, dtype=float))

    return _fourier


@dataclass(frozen=True)
class Observation:
    """One unit: outcome, treatment, instrument angle and threshold instrument."""

    y: float
    d: int
    phi_angle: float
    v: float
    x: Optional[Sequence[float]] = None
    b: Optional[int] = None

    def __post_init__(self) -> None:
        if self.d not in (0, 1):
            raise EstimationError("invalid_sample", f"treatment must be 0 or 1, got {self.d!r}")
        if not (0.0 <= self.phi_angle <= math.pi):
            raise EstimationError("invalid_sample", f"phi_angle must lie in [0, pi], got {self.phi_angle!r}")
        if self.b is not None and self.b not in (0, 1):
            raise EstimationError("invalid_sample", f"binary instrument must be 0 or 1, got {self.b!r}")

    @property
    def s(self) -> np.ndarray:
        return np.array([math.cos(self.phi_angle), math.sin(self.phi_angle)])


def _frozen(values: Any, dtype: Any = float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Sample:
    """Immutable column store of observations."""

    y: np.ndarray
    d: np.ndarray
    phi_angle: np.ndarray
    v: np.ndarray
    x: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", _frozen(self.y))
        object.__setattr__(self, "d", _frozen(self.d, np.int8))
        object.__setattr__(self, "phi_angle", _frozen(self.phi_angle))
        object.__setattr__(self, "v", _frozen(self.v))
        n = self.y.shape[0]
        if n < 1:
            raise EstimationError("invalid_sample", "a sample needs at least one observation")
        for name in ("d", "phi_angle", "v"):
            if getattr(self, name).shape != (n,):
                raise EstimationError("invalid_sample", f"column {name} must have shape ({n},)")
        if not np.all((self.d == 0) | (self.d == 1)):
            raise EstimationError("invalid_sample", "treatment column must be binary")
        if np.any(self.phi_angle < 0.0) or np.any(self.phi_angle > math.pi):
            raise EstimationError("invalid_sample", "phi_angle must lie in [0, pi]")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.v))):
            raise EstimationError("invalid_sample", "outcomes and instruments must be finite")
        if self.x is not None:
            x = _frozen(self.x)
            if x.ndim == 1:
                x = _frozen(x.reshape(-1, 1))
            if x.shape[0] != n:
                raise EstimationError("invalid_sample", "covariates must have one row per observation")
            object.__setattr__(self, "x", x)
        if self.b is not None:
            b = _frozen(self.b, np.int8)
            if b.shape != (n,) or not np.all((b == 0) | (b == 1)):
                raise EstimationError("invalid_sample", "binary instrument column must be 0/1 with one entry per row")
            object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    def __len__(self) -> int:
        return self.n

    @property
    def s(self) -> np.ndarray:
        """Unit vectors (cos phi, sin phi), shape (N, 2)."""
        cached = self._cache.get("s")
        if cached is None:
            cached = _frozen(np.column_stack([np.cos(self.phi_angle), np.sin(self.phi_angle)]))
            self._cache["s"] = cached
        return cached

    @classmethod
    def from_observations(cls, observations: Sequence[Observation]) -> "Sample":
        if not observations:
            raise EstimationError("invalid_sample", "a sample needs at least one observation")
        has_x = all(obs.x is not None for obs in observations)
        has_b = all(obs.b is not None for obs in observations)
        return cls(
            y=[obs.y for obs in observations],
            d=[obs.d for obs in observations],
            phi_angle=[obs.phi_angle for obs in observations],
            v=[obs.v for obs in observations],
            x=[list(obs.x) for obs in observations] if has_x else None,  # type: ignore[arg-type]
            b=[obs.b for obs in observations] if has_b else None,
        )

    def observations(self) -> Iterator[Observation]:
        for i in range(self.n):
            yield Observation(
                y=float(self.y[i]),
                d=int(self.d[i]),
                phi_angle=float(self.phi_angle[i]),
                v=float(self.v[i]),
                x=None if self.x is None else tuple(float(value) for value in self.x[i]),
                b=None if self.b is None else int(self.b[i]),
            )

    def restrict(self, mask: np.ndarray) -> "Sample":
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise EstimationError("empty_subsample", "restriction leaves no observations")
        return Sample(
            y=self.y[mask],
            d=self.d[mask],
            phi_angle=self.phi_angle[mask],
            v=self.v[mask],
            x=None if self.x is None else self.x[mask],
            b=None if self.b is None else self.b[mask],
        )

    def responses(self, phi_fn: OutcomeTransform, zeta: Zeta) -> np.ndarray:
        """phi(y_i) * zeta(d_i) as a length-N array (complex when phi is)."""
        values = np.asarray(phi_fn(self.y))
        if values.shape != (self.n,):
            values = np.broadcast_to(values, (self.n,))
        return values * Zeta(zeta).apply(self.d)

    def require_treatment_variation(self) -> None:
        if np.all(self.d == self.d[0]):
            raise EstimationError("no_treatment_variation", "no variation in treatment")

    def to_frame(self) -> pd.DataFrame:
        columns: Dict[str, Any] = {
            "y": self.y,
            "d": self.d.astype(int),
            "phi_angle": self.phi_angle,
            "v": self.v,
        }
        if self.b is not None:
            columns["b"] = self.b.astype(int)
        if self.x is not None:
            for k in range(self.x.shape[1]):
                columns[f"x{k}"] = self.x[:, k]
        return pd.DataFrame(columns)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Sample":
        missing = [name for name in ("y", "d", "phi_angle", "v") if name not in frame.columns]
        if missing:
            raise EstimationError("invalid_sample", f"sample is missing columns {missing}")
        x_columns = sorted(
            (name for name in frame.columns if name.startswith("x") and name[1:].isdigit()),
            key=lambda name: int(name[1:]),
        )
        return cls(
            y=frame["y"].to_numpy(dtype=float),
            d=frame["d"].to_numpy(dtype=int),
            phi_angle=frame["phi_angle"].to_numpy(dtype=float),
            v=frame["v"].to_numpy(dtype=float),
            x=frame[x_columns].to_numpy(dtype=float) if x_columns else None,
            b=frame["b"].to_numpy(dtype=int) if "b" in frame.columns else None,
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "Sample":
        return cls.from_frame(pd.read_csv(path))


def box_axes(box: Box, grid_res: Sequence[int]) -> List[np.ndarray]:
    n1, n2 = grid_res
    return [np.linspace(box.g_lo, box.g_hi, int(n1)), np.linspace(box.t_lo, box.t_hi, int(n2))]


def trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.size == 1:
        return np.ones(1)
    gaps = np.diff(axis)
    weights = np.zeros_like(axis)
    weights[:-1] += gaps / 2.0
    weights[1:] += gaps / 2.0
    return weights


def compensated_sum(values: np.ndarray) -> float:
    """Order-independent sum of a real array."""
    return math.fsum(np.ravel(np.asarray(values, dtype=float)).tolist())


@dataclass(frozen=True, eq=False)
class GridFunction2D:
    """Values on a uniform (gamma, theta) grid; masked nodes carry no value."""

    box: Box
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        values = np.array(self.values, copy=True)
        if values.ndim != 2 or min(values.shape) < 2:
            raise EstimationError("invalid_input", "grid values must be a 2-D array with >= 2 nodes per axis")
        mask = None if self.mask is None else np.array(self.mask, dtype=bool, copy=True)
        if mask is not None and mask.shape != values.shape:
            raise EstimationError("invalid_input", "grid mask must match the value array")
        active = values if mask is None else values[~mask]
        if not np.all(np.isfinite(active)):
            raise EstimationError("invalid_input", "grid values must be finite on unmasked nodes")
        if mask is not None:
            values = np.where(mask, 0.0, values)
            mask.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_function(
        cls,
        box: Box,
        grid_res: Sequence[int],
        fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    ) -> "GridFunction2D":
        gamma, theta = box_axes(box, grid_res)
        gg, tt = np.meshgrid(gamma, theta, indexing="ij")
        return cls(box, np.asarray(fn(gg, tt)))

    @classmethod
    def zeros(cls, box: Box, grid_res: Sequence[int]) -> "GridFunction2D":
        return cls(box, np.zeros(tuple(int(n) for n in grid_res)))

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def gamma(self) -> np.ndarray:
        return np.linspace(self.box.g_lo, self.box.g_hi, self.values.shape[0])

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(self.box.t_lo, self.box.t_hi, self.values.shape[1])

    @property
    def spacing(self) -> tuple:
        return (
            (self.box.g_hi - self.box.g_lo) / (self.values.shape[0] - 1),
            (self.box.t_hi - self.box.t_lo) / (self.values.shape[1] - 1),
        )

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def nodes(self) -> np.ndarray:
        """Grid nodes as an (n1*n2, 2) array in C order."""
        gg, tt = np.meshgrid(self.gamma, self.theta, indexing="ij")
        return np.column_stack([gg.ravel(), tt.ravel()])

    def active(self) -> np.ndarray:
        return np.ones(self.values.shape, dtype=bool) if self.mask is None else ~self.mask

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction2D":
        return GridFunction2D(self.box, fn(self.values), self.mask)

    def _restricted(self, box: Optional[Box]):
        if box is None or box == self.box:
            return self.gamma, self.theta, self.values, self.active()
        if not self.box.contains(box):
            raise EstimationError(
                "grid_mismatch",
                f"integration box {box.as_tuple()} is not inside the grid box {self.box.as_tuple()}",
            )
        dg, dt = self.spacing
        n1 = max(2, int(math.ceil((box.g_hi - box.g_lo) / dg - 1e-9)) + 1)
        n2 = max(2, int(math.ceil((box.t_hi - box.t_lo) / dt - 1e-9)) + 1)
        gamma = np.linspace(box.g_lo, box.g_hi, n1)
        theta = np.linspace(box.t_lo, box.t_hi, n2)
        gg, tt = np.meshgrid(gamma, theta, indexing="ij")
        points = np.column_stack([gg.ravel(), tt.ravel()])
        interp = RegularGridInterpolator(
            (self.gamma, self.theta), self.values, method="linear", bounds_error=False, fill_value=None
        )
        values = interp(points).reshape(n1, n2)
        active = np.ones_like(values, dtype=bool)
        if self.mask is not None:
            mask_interp = RegularGridInterpolator(
                (self.gamma, self.theta), self.mask.astype(float), method="linear", bounds_error=False, fill_value=None
            )
            active = mask_interp(points).reshape(n1, n2) < 0.5
        return gamma, theta, values, active

    def integrate(self, box: Optional[Box] = None) -> Union[float, complex]:
        """Trapezoid integral over ``box`` (the whole grid by default); masked nodes count as 0."""
        gamma, theta, values, active = self._restricted(box)
        weights = np.outer(trapezoid_weights(gamma), trapezoid_weights(theta))
        terms = np.where(active, values, 0.0) * weights
        if np.iscomplexobj(terms):
            return complex(compensated_sum(terms.real), compensated_sum(terms.imag))
        return compensated_sum(terms)

    def to_frame(self) -> pd.DataFrame:
        gg, tt = np.meshgrid(self.gamma, self.theta, indexing="ij")
        values = np.where(self.active(), self.values, np.nan)
        frame = pd.DataFrame({"gamma": gg.ravel(), "theta": tt.ravel()})
        if self.is_complex:
            frame["value"] = values.real.ravel()
            frame["im_value"] = values.imag.ravel()
        else:
            frame["value"] = values.ravel()
        return frame
