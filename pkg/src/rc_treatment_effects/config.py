"""Configuration utilities for rc-treatment-effects."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from dotenv import load_dotenv

# Runtime settings (workers, log level, metrics) may live in a local .env file.
load_dotenv(override=False)


class ConfigError(ValueError):
    """Raised when configuration values are invalid or missing."""


SMOOTHING_KINDS = ("bump_psi0", "indicator")
REGRESSION_KERNELS = ("gaussian", "epanechnikov")
DGP_VARIANTS = ("baseline", "independent", "constant_delta", "scalar_L1", "binary")
SERIES_TAPERS = ("smooth", "indicator")


def _as_bool(value: str) -> bool:
    return value.lower() in {"1", "true", "yes", "on"}


def _require(value: Any, name: str) -> Any:
    if value is None or (isinstance(value, str) and value.strip() == ""):
        raise ConfigError(f"{name} is required but was not provided")
    return value


def _pair(value: Sequence[Any], name: str, cast=float) -> Tuple[Any, Any]:
    try:
        first, second = value
        return cast(first), cast(second)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a pair of numbers, got {value!r}") from exc


@dataclass(frozen=True)
class Box:
    """Closed rectangle [g_lo, g_hi] x [t_lo, t_hi] in (gamma, theta)-space."""

    g_lo: float
    g_hi: float
    t_lo: float
    t_hi: float

    def __post_init__(self) -> None:
        if not (self.g_lo < self.g_hi and self.t_lo < self.t_hi):
            raise ConfigError(f"box must be nonempty, got {self.as_tuple()}")

    @classmethod
    def from_sequence(cls, values: Sequence[Any], name: str = "box") -> "Box":
        try:
            g_lo, g_hi, t_lo, t_hi = (float(v) for v in values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name} must be [g_lo, g_hi, t_lo, t_hi], got {values!r}") from exc
        return cls(g_lo, g_hi, t_lo, t_hi)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.g_lo, self.g_hi, self.t_lo, self.t_hi)

    def contains(self, other: "Box", tol: float = 1e-12) -> bool:
        return (
            other.g_lo >= self.g_lo - tol
            and other.g_hi <= self.g_hi + tol
            and other.t_lo >= self.t_lo - tol
            and other.t_hi <= self.t_hi + tol
        )

    @property
    def area(self) -> float:
        return (self.g_hi - self.g_lo) * (self.t_hi - self.t_lo)


# Integration boxes of the simulation study and the plotting box.
BOX_1 = Box(-1.5, 3.5, -3.0, 2.0)
BOX_2 = Box(-1.75, 3.75, -3.25, 2.25)
BOX_3 = Box(-2.0, 4.0, -3.5, 2.5)
BOX_4 = Box(-0.5, 2.5, -2.0, 1.0)
PLOT_BOX = Box(-4.0, 6.0, -5.5, 4.5)


@dataclass(frozen=True)
class RegressionConfig:
    """Bandwidths, degree and kernel of the local-polynomial plug-in."""

    bandwidth_phi: float = 0.5
    bandwidth_v: float = 1.0
    degree: int = 1
    kernel: str = "epanechnikov"

    def __post_init__(self) -> None:
        if self.bandwidth_phi <= 0 or self.bandwidth_v <= 0:
            raise ConfigError("regression bandwidths must be > 0")
        if self.degree not in (1, 2):
            raise ConfigError("regression degree must be 1 or 2")
        if self.kernel not in REGRESSION_KERNELS:
            raise ConfigError(f"regression kernel must be one of {REGRESSION_KERNELS}")


@dataclass(frozen=True)
class EstimatorConfig:
    """Smoothing knobs shared by the Radon-inversion estimators."""

    T: float = 6.0
    reg: RegressionConfig = field(default_factory=RegressionConfig)
    m_floor: float = 1e-3
    tau: Optional[float] = None
    dens_floor: Optional[float] = None
    box: Box = BOX_3
    grid_res: Tuple[int, int] = (51, 51)
    n_phi: int = 121
    n_u: int = 241
    psi: str = "bump_psi0"
    quad_points: int = 512
    density_bandwidths: Optional[Tuple[float, float]] = None
    L: int = 2

    def __post_init__(self) -> None:
        if self.T <= 0:
            raise ConfigError("estimator T must be > 0")
        if self.m_floor <= 0:
            raise ConfigError("estimator m_floor must be > 0")
        if self.tau is not None and self.tau <= 0:
            raise ConfigError("estimator tau must be > 0 when provided")
        if self.dens_floor is not None and self.dens_floor < 0:
            raise ConfigError("estimator dens_floor must be >= 0 when provided")
        if len(self.grid_res) != 2 or min(self.grid_res) < 2:
            raise ConfigError("estimator grid must have at least 2 nodes per axis")
        if self.n_phi < 16 or self.n_u < 16:
            raise ConfigError("estimator n_phi and n_u must be >= 16")
        if self.psi not in SMOOTHING_KINDS:
            raise ConfigError(f"estimator psi must be one of {SMOOTHING_KINDS}")
        if self.quad_points < 64:
            raise ConfigError("estimator quad_points must be >= 64")
        if self.density_bandwidths is not None and min(self.density_bandwidths) <= 0:
            raise ConfigError("density bandwidths must be > 0")
        if self.L < 1:
            raise ConfigError("estimator L must be >= 1")

    def with_cutoff(self, T: float) -> "EstimatorConfig":
        return replace(self, T=T)


@dataclass(frozen=True)
class DeconvConfig:
    """Frequency-domain smoothing of the conditional deconvolution."""

    R_delta: float = 0.85
    kernel: str = "bump_psi0"
    trim_level: float = 0.0
    n_t: int = 257
    R_max: float = 10.0
    gamma_grid: Tuple[int, int] = (13, 13)

    def __post_init__(self) -> None:
        if not (0 < self.R_delta <= self.R_max):
            raise ConfigError("deconv R_delta must satisfy 0 < R_delta <= R_max")
        if self.kernel not in SMOOTHING_KINDS:
            raise ConfigError(f"deconv kernel must be one of {SMOOTHING_KINDS}")
        if self.trim_level < 0:
            raise ConfigError("deconv trim must be >= 0")
        if self.n_t < 64:
            raise ConfigError("deconv n_t must be >= 64")
        if len(self.gamma_grid) != 2 or min(self.gamma_grid) < 2:
            raise ConfigError("deconv gamma_grid must have at least 2 nodes per axis")


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation and trimming of the hemispherical series estimator."""

    T: int = 3
    m_floor: float = 1e-3
    taper: str = "smooth"

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ConfigError("series T must be >= 1")
        if self.m_floor <= 0:
            raise ConfigError("series m_floor must be > 0")
        if self.taper not in SERIES_TAPERS:
            raise ConfigError(f"series taper must be one of {SERIES_TAPERS}")


@dataclass(frozen=True)
class DgpSpec:
    """Which simulation design to draw from, how many units, and the seed."""

    variant: str = "baseline"
    n: int = 10000
    seed: int = 0
    delta_constant: float = 4.0
    alpha: float = 1.0
    b_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.variant not in DGP_VARIANTS:
            raise ConfigError(f"dgp variant must be one of {DGP_VARIANTS}")
        if self.n < 1:
            raise ConfigError("dgp n must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("dgp seed must be a 64-bit unsigned integer")
        if not (0 < self.b_prob < 1):
            raise ConfigError("dgp b_prob must lie in (0, 1)")

    def for_replication(self, index: int) -> "DgpSpec":
        """Seed stream of replication ``index`` (seed xor index)."""
        return replace(self, seed=self.seed ^ index)


def _default_density_config() -> EstimatorConfig:
    return EstimatorConfig(T=6.0)


def _default_numerator_config() -> EstimatorConfig:
    return EstimatorConfig(T=10.0)


@dataclass(frozen=True)
class StudyConfig:
    """Monte-Carlo study reproducing the effect and error tables."""

    replications: int = 25
    n: int = 10000
    seed: int = 20240101
    variant: str = "baseline"
    boxes: Tuple[Box, ...] = (BOX_1, BOX_2, BOX_3)
    error_box: Box = BOX_1
    density: EstimatorConfig = field(default_factory=_default_density_config)
    numerator: EstimatorConfig = field(default_factory=_default_numerator_config)
    direct_density_T: float = 1.8
    direct_numerator_T: float = 1.7
    study_id: str = "mc"

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigError("study S must be >= 1")
        if self.n < 1:
            raise ConfigError("study n must be >= 1")
        if not self.boxes:
            raise ConfigError("study boxes must not be empty")
        if self.direct_density_T <= 0 or self.direct_numerator_T <= 0:
            raise ConfigError("study direct-estimator cutoffs must be > 0")
        for box in tuple(self.boxes) + (self.error_box,):
            if not self.density.box.contains(box) or not self.numerator.box.contains(box):
                raise ConfigError(f"study box {box.as_tuple()} must lie inside the estimation grid box")

    def dgp_spec(self, index: int) -> DgpSpec:
        return DgpSpec(variant=self.variant, n=self.n, seed=self.seed).for_replication(index)


@dataclass(frozen=True)
class RuntimeSettings:
    """Process-level settings read from the environment."""

    log_level: str = "INFO"
    workers: int = 1
    metrics_backend: str = "logging"
    metrics_port: Optional[int] = None
    progress_logging: bool = True

    @classmethod
    def from_env(cls, env: Optional[Mapping[str, str]] = None) -> "RuntimeSettings":
        """Build runtime settings from RCTE_* environment variables."""
        env = env if env is not None else os.environ

        try:
            workers = int(env.get("RCTE_WORKERS", "1"))
            metrics_port_raw = env.get("RCTE_METRICS_PORT")
            metrics_port = int(metrics_port_raw) if metrics_port_raw else None
        except ValueError as exc:
            raise ConfigError(f"Invalid numeric configuration: {exc}") from exc
        log_level = env.get("RCTE_LOG_LEVEL", "INFO").upper()
        metrics_backend = env.get("RCTE_METRICS_BACKEND", "logging").strip().lower()
        progress_logging = _as_bool(env.get("RCTE_PROGRESS_LOGGING", "true"))

        if workers < 1:
            raise ConfigError("RCTE_WORKERS must be >= 1")
        if metrics_backend not in {"logging", "prometheus"}:
            raise ConfigError("RCTE_METRICS_BACKEND must be 'logging' or 'prometheus'")
        if metrics_port is not None and metrics_port < 0:
            raise ConfigError("RCTE_METRICS_PORT must be >= 0 when provided")

        return cls(
            log_level=log_level,
            workers=workers,
            metrics_backend=metrics_backend,
            metrics_port=metrics_port,
            progress_logging=progress_logging,
        )


def _parse_estimator(data: Mapping[str, Any], base: EstimatorConfig) -> EstimatorConfig:
    reg = base.reg
    if any(key in data for key in ("h", "h_phi", "degree", "kernel")):
        reg = RegressionConfig(
            bandwidth_phi=float(data.get("h_phi", reg.bandwidth_phi)),
            bandwidth_v=float(data.get("h", reg.bandwidth_v)),
            degree=int(data.get("degree", reg.degree)),
            kernel=str(data.get("kernel", reg.kernel)),
        )
    tau = data.get("tau", base.tau)
    dens_floor = data.get("dens_floor", base.dens_floor)
    density_bandwidths = data.get("density_bandwidths", base.density_bandwidths)
    return EstimatorConfig(
        T=float(data.get("T", base.T)),
        reg=reg,
        m_floor=float(data.get("m_floor", base.m_floor)),
        tau=None if tau is None else float(tau),
        dens_floor=None if dens_floor is None else float(dens_floor),
        box=Box.from_sequence(data["box"], "estimator.box") if "box" in data else base.box,
        grid_res=_pair(data["grid"], "estimator.grid", int) if "grid" in data else base.grid_res,
        n_phi=int(data.get("n_phi", base.n_phi)),
        n_u=int(data.get("n_u", base.n_u)),
        psi=str(data.get("psi", base.psi)),
        quad_points=int(data.get("quad_points", base.quad_points)),
        density_bandwidths=None
        if density_bandwidths is None
        else _pair(density_bandwidths, "estimator.density_bandwidths"),
    )


def _parse_deconv(data: Mapping[str, Any]) -> DeconvConfig:
    base = DeconvConfig()
    return DeconvConfig(
        R_delta=float(data.get("R_delta", base.R_delta)),
        kernel=str(data.get("kernel", base.kernel)),
        trim_level=float(data.get("trim", base.trim_level)),
        n_t=int(data.get("n_t", base.n_t)),
        R_max=float(data.get("R_max", base.R_max)),
        gamma_grid=_pair(data["gamma_grid"], "deconv.gamma_grid", int)
        if "gamma_grid" in data
        else base.gamma_grid,
    )


def _parse_dgp(data: Mapping[str, Any]) -> DgpSpec:
    base = DgpSpec()
    return DgpSpec(
        variant=str(_require(data.get("variant", base.variant), "dgp.variant")),
        n=int(data.get("n", base.n)),
        seed=int(data.get("seed", base.seed)),
        delta_constant=float(data.get("c", base.delta_constant)),
        alpha=float(data.get("alpha", base.alpha)),
        b_prob=float(data.get("b_prob", base.b_prob)),
    )


def _parse_study(data: Mapping[str, Any], dgp: DgpSpec, estimator: EstimatorConfig) -> StudyConfig:
    base = StudyConfig()
    boxes = (
        tuple(Box.from_sequence(b, "study.boxes") for b in data["boxes"]) if "boxes" in data else base.boxes
    )
    density = estimator.with_cutoff(float(data.get("T_density", base.density.T)))
    numerator = estimator.with_cutoff(float(data.get("T_numerator", base.numerator.T)))
    return StudyConfig(
        replications=int(data.get("S", base.replications)),
        n=int(data.get("n", dgp.n)),
        seed=int(data.get("seed", dgp.seed)),
        variant=str(data.get("variant", dgp.variant)),
        boxes=boxes,
        error_box=Box.from_sequence(data["error_box"], "study.error_box")
        if "error_box" in data
        else boxes[0],
        density=density,
        numerator=numerator,
        direct_density_T=float(data.get("T_direct_density", base.direct_density_T)),
        direct_numerator_T=float(data.get("T_direct_numerator", base.direct_numerator_T)),
        study_id=str(data.get("study_id", base.study_id)),
    )


@dataclass(frozen=True)
class AppConfig:
    """Complete configuration assembled from a JSON document and the environment."""

    dgp: DgpSpec = field(default_factory=DgpSpec)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    deconv: DeconvConfig = field(default_factory=DeconvConfig)
    series: SeriesConfig = field(default_factory=SeriesConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    runtime: RuntimeSettings = field(default_factory=RuntimeSettings)

    @classmethod
    def from_mapping(
        cls,
        data: Optional[Mapping[str, Any]] = None,
        env: Optional[Mapping[str, str]] = None,
    ) -> "AppConfig":
        """Parse the documented JSON schema; unknown sections are rejected."""
        data = dict(data or {})
        unknown = set(data) - {"dgp", "estimator", "deconv", "series", "study"}
        if unknown:
            raise ConfigError(f"Unknown configuration sections: {sorted(unknown)}")
        try:
            dgp = _parse_dgp(data.get("dgp", {}))
            estimator = _parse_estimator(data.get("estimator", {}), EstimatorConfig())
            deconv = _parse_deconv(data.get("deconv", {}))
            series_data = data.get("series", {})
            series = SeriesConfig(
                T=int(series_data.get("T", SeriesConfig.T)),
                m_floor=float(series_data.get("m_floor", SeriesConfig.m_floor)),
                taper=str(series_data.get("taper", SeriesConfig.taper)),
            )
            study = _parse_study(data.get("study", {}), dgp, estimator)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"Invalid numeric configuration: {exc}") from exc
        return cls(
            dgp=dgp,
            estimator=estimator,
            deconv=deconv,
            series=series,
            study=study,
            runtime=RuntimeSettings.from_env(env),
        )

    @classmethod
    def from_file(
        cls,
        path: Union[str, Path, None],
        env: Optional[Mapping[str, str]] = None,
    ) -> "AppConfig":
        """Load a JSON configuration file; ``None`` yields the defaults."""
        if path is None:
            return cls.from_mapping({}, env)
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Configuration file not found: {path}")
        try:
            data: Dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Configuration file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("Configuration root must be a JSON object")
        return cls.from_mapping(data, env)
