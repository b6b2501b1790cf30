"""One Monte-Carlo replication: simulate, estimate, integrate, compare with the truth."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .config import Box, StudyConfig
from .dgp import generate, true_density_gamma, true_ucate
from .estimation.base import EstimationError, GridFunction2D, Zeta, constant_one, identity
from .estimation.estimators import (
    RadonPipeline,
    direct_estimate_grid,
    estimate_ate,
    estimate_tt,
    estimate_ucate_parts,
    tt_weight,
)
from .metrics import ReplicationEvent

LOGGER = logging.getLogger("rc_treatment_effects.replication")

NORMS = ("sup", "l2")
ESTIMANDS = ("density", "ucate_f")

TruthFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def grid_error(estimate: GridFunction2D, truth: TruthFn, box: Optional[Box] = None, norm: str = "sup") -> float:
    """Sup over grid nodes inside ``box`` or L2 (trapezoid) norm of estimate minus truth."""
    if norm not in NORMS:
        raise EstimationError("invalid_input", f"norm must be one of {NORMS}, got {norm!r}")
    gg, tt = np.meshgrid(estimate.gamma, estimate.theta, indexing="ij")
    diff = np.abs(estimate.values.real - np.asarray(truth(gg, tt), dtype=float))
    if norm == "l2":
        squared = GridFunction2D(estimate.box, diff**2, estimate.mask)
        return math.sqrt(max(float(squared.integrate(box)), 0.0))
    inside = estimate.active()
    if box is not None:
        tol = 1e-9
        inside = inside & (gg >= box.g_lo - tol) & (gg <= box.g_hi + tol) & (tt >= box.t_lo - tol) & (tt <= box.t_hi + tol)
    if not inside.any():
        raise EstimationError("empty_unmasked_region", "no grid node of the estimate lies in the box")
    return float(diff[inside].max())


def box_label(index: int) -> str:
    return f"B{index + 1}"


@dataclass(frozen=True)
class ReplicationTask:
    study: StudyConfig
    index: int


@dataclass
class ReplicationOutcome:
    """Result of one replication; ``status`` is ``ok`` or ``error``."""

    index: int
    seed: int
    status: str
    n: int
    duration_ms: float = 0.0
    ate: Dict[str, float] = field(default_factory=dict)
    tt: Dict[str, float] = field(default_factory=dict)
    errors: Dict[str, float] = field(default_factory=dict)
    error_code: Optional[str] = None
    error_message: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {"replication": self.index, "seed": self.seed, "status": self.status, "n": self.n}
        row.update({f"ATE_{label}": value for label, value in self.ate.items()})
        row.update({f"TT_{label}": value for label, value in self.tt.items()})
        row.update(self.errors)
        row["error_code"] = self.error_code or ""
        return row

    def event(self, study_id: str) -> ReplicationEvent:
        return ReplicationEvent(
            study_id=study_id,
            replication=self.index,
            seed=self.seed,
            status=self.status,
            duration_ms=self.duration_ms,
            sample_size=self.n,
            error_code=self.error_code,
        )


def _truths(study: StudyConfig) -> Dict[str, TruthFn]:
    variant = study.variant
    return {
        "density": lambda g, t: true_density_gamma(g, t, variant),
        "ucate_f": lambda g, t: true_ucate(g, t, variant) * true_density_gamma(g, t, variant),
    }


def _estimate(task: ReplicationTask) -> ReplicationOutcome:
    study = task.study
    spec = study.dgp_spec(task.index)
    sample = generate(spec)
    pipeline = RadonPipeline(sample, study.numerator)
    parts = estimate_ucate_parts(sample, study.numerator, study.density, pipeline=pipeline)
    weight = tt_weight(sample)
    outcome = ReplicationOutcome(index=task.index, seed=spec.seed, status="ok", n=sample.n)
    for k, box in enumerate(study.boxes):
        label = box_label(k)
        outcome.ate[label] = estimate_ate(parts.ucate_times_f, box)
        outcome.tt[label] = estimate_tt(sample, parts.ucate_times_f, box, weight=weight)

    direct = {
        "density": direct_estimate_grid(
            sample, constant_one, Zeta.D, study.density.with_cutoff(study.direct_density_T), clamp=True
        ),
        "ucate_f": direct_estimate_grid(
            sample, identity, Zeta.ONE, study.numerator.with_cutoff(study.direct_numerator_T)
        ),
    }
    pipelines = {"density": parts.density, "ucate_f": parts.ucate_times_f}
    truths = _truths(study)
    for estimand in ESTIMANDS:
        for norm in NORMS:
            outcome.errors[f"{estimand}_{norm}_pipeline"] = grid_error(
                pipelines[estimand], truths[estimand], study.error_box, norm
            )
            outcome.errors[f"{estimand}_{norm}_direct"] = grid_error(
                direct[estimand], truths[estimand], study.error_box, norm
            )
    return outcome


def run_replication(task: ReplicationTask) -> ReplicationOutcome:
    """Run one replication; failures come back as an ``error`` outcome instead of raising."""
    started = time.perf_counter()
    seed = task.study.dgp_spec(task.index).seed
    try:
        outcome = _estimate(task)
    except EstimationError as exc:
        LOGGER.warning("Replication %s failed code=%s: %s", task.index, exc.code, exc.message)
        outcome = ReplicationOutcome(
            index=task.index,
            seed=seed,
            status="error",
            n=task.study.n,
            error_code=exc.code,
            error_message=exc.message,
        )
    except Exception as exc:  # pragma: no cover - unexpected numerical failure
        LOGGER.exception("Unexpected error in replication %s", task.index)
        outcome = ReplicationOutcome(
            index=task.index,
            seed=seed,
            status="error",
            n=task.study.n,
            error_code="internal_error",
            error_message=str(exc),
        )
    outcome.duration_ms = (time.perf_counter() - started) * 1000.0
    return outcome


def replication_error(study: StudyConfig, index: int, estimand: str, norm: str = "sup") -> float:
    """Pipeline grid error of one estimand on one replication of ``study``."""
    if estimand not in ESTIMANDS:
        raise EstimationError("invalid_input", f"estimand must be one of {ESTIMANDS}, got {estimand!r}")
    sample = generate(study.dgp_spec(index))
    if estimand == "density":
        parts = estimate_ucate_parts(sample, study.density)
        estimate = parts.density
    else:
        estimate = estimate_ucate_parts(sample, study.numerator, study.density).ucate_times_f
    return grid_error(estimate, _truths(study)[estimand], study.error_box, norm)
