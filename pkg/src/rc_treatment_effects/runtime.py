"""Runtime orchestration for Monte-Carlo studies."""

from __future__ import annotations

import asyncio
import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import StudyConfig
from .estimation.base import EstimationError
from .metrics import LoggingMetricsCollector, MetricsCollector
from .replication import ESTIMANDS, NORMS, ReplicationOutcome, ReplicationTask, replication_error, run_replication
from .store import NullResultStore, ResultStore

LOGGER = logging.getLogger("rc_treatment_effects.runtime")

SUMMARY_COLUMNS = ("Mean", "P5", "P10", "Median", "P90", "P95")
_PERCENTILES = (5.0, 10.0, 50.0, 90.0, 95.0)


def _level_for(name: str) -> int:
    level = getattr(logging, name.upper(), logging.INFO)
    if isinstance(level, int):
        return level
    return logging.INFO


def summarize(values: Sequence[float]) -> Dict[str, float]:
    """Mean and the P5/P10/median/P90/P95 quantiles of a replication column."""
    arr = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if arr.size == 0:
        return {column: math.nan for column in SUMMARY_COLUMNS}
    p5, p10, median, p90, p95 = np.percentile(arr, _PERCENTILES)
    return {
        "Mean": math.fsum(arr) / arr.size,
        "P5": float(p5),
        "P10": float(p10),
        "Median": float(median),
        "P90": float(p90),
        "P95": float(p95),
    }


@dataclass
class McStudyResult:
    """Per-replication outcomes in index order with the effect and error tables."""

    study_id: str
    requested: int
    outcomes: List[ReplicationOutcome] = field(default_factory=list)
    incomplete: bool = False

    @property
    def succeeded(self) -> List[ReplicationOutcome]:
        return [outcome for outcome in self.outcomes if outcome.ok]

    @property
    def failed(self) -> int:
        return sum(1 for outcome in self.outcomes if not outcome.ok)

    @property
    def durations_ms(self) -> List[float]:
        return [outcome.duration_ms for outcome in self.outcomes]

    def _labels(self) -> List[str]:
        labels: List[str] = []
        for outcome in self.succeeded:
            for label in outcome.ate:
                if label not in labels:
                    labels.append(label)
        return labels

    def effects_table(self) -> pd.DataFrame:
        rows = []
        ok = self.succeeded
        for kind in ("ATE", "TT"):
            for label in self._labels():
                values = [getattr(o, kind.lower()).get(label, math.nan) for o in ok]
                rows.append({"estimand": f"{kind}_{label[1:]}", **summarize(values)})
        return pd.DataFrame(rows, columns=["estimand", *SUMMARY_COLUMNS])

    def errors_table(self) -> pd.DataFrame:
        rows = []
        ok = self.succeeded
        for estimand in ESTIMANDS:
            for norm in NORMS:
                row: Dict[str, Any] = {"estimand": estimand, "norm": norm}
                for method in ("pipeline", "direct"):
                    values = [o.errors.get(f"{estimand}_{norm}_{method}", math.nan) for o in ok]
                    row[method] = summarize(values)["Mean"]
                rows.append(row)
        return pd.DataFrame(rows, columns=["estimand", "norm", "pipeline", "direct"])

    def replications_table(self) -> pd.DataFrame:
        return pd.DataFrame([outcome.to_row() for outcome in self.outcomes])

    def to_summary(self) -> Dict[str, Any]:
        """Timing-free summary; identical studies serialise to identical bytes."""
        effects = self.effects_table().set_index("estimand")
        return {
            "study_id": self.study_id,
            "requested": self.requested,
            "completed": len(self.outcomes),
            "failed": self.failed,
            "incomplete": self.incomplete,
            "effects": {name: {k: float(v) for k, v in row.items()} for name, row in effects.iterrows()},
            "error_codes": sorted({o.error_code for o in self.outcomes if o.error_code}),
        }

    def write(self, store: ResultStore) -> None:
        store.write_table("table_effects", self.effects_table())
        store.write_table("table_errors", self.errors_table())
        store.write_table("replications", self.replications_table())
        store.write_json("study", self.to_summary())


class StudyRuntime:
    """Schedule replications on an executor under a concurrency limit and fold them in index order."""

    def __init__(
        self,
        *,
        config: StudyConfig,
        workers: int = 1,
        metrics: Optional[MetricsCollector] = None,
        store: Optional[ResultStore] = None,
        executor: Optional[Executor] = None,
        log_level: str = "INFO",
        progress_logging: bool = True,
    ) -> None:
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.config = config
        self.workers = workers
        LOGGER.setLevel(_level_for(log_level))
        self._metrics = metrics or LoggingMetricsCollector()
        self._store = store or NullResultStore()
        self._executor = executor
        self._owns_executor = False
        self._progress = progress_logging
        self._shutdown_event = asyncio.Event()

    def request_shutdown(self) -> None:
        """Stop scheduling new replications; running ones finish."""
        self._shutdown_event.set()

    def _ensure_executor(self) -> Optional[Executor]:
        if self._executor is None and self.workers > 1:
            self._executor = ProcessPoolExecutor(max_workers=self.workers)
            self._owns_executor = True
        return self._executor

    async def run(self) -> McStudyResult:
        loop = asyncio.get_running_loop()
        semaphore = asyncio.Semaphore(self.workers)
        executor = self._ensure_executor()
        total = self.config.replications
        LOGGER.info(
            "Starting study_id=%s replications=%s n=%s workers=%s",
            self.config.study_id,
            total,
            self.config.n,
            self.workers,
        )

        async def _one(index: int) -> Optional[ReplicationOutcome]:
            async with semaphore:
                if self._shutdown_event.is_set():
                    return None
                task = ReplicationTask(self.config, index)
                outcome = await loop.run_in_executor(executor, run_replication, task)
            self._metrics.record(outcome.event(self.config.study_id))
            if self._progress:
                LOGGER.info(
                    "Replication %s/%s status=%s duration_ms=%.1f",
                    index + 1,
                    total,
                    outcome.status,
                    outcome.duration_ms,
                )
            return outcome

        try:
            results = await asyncio.gather(*(_one(index) for index in range(total)))
        finally:
            if self._owns_executor and self._executor is not None:
                self._executor.shutdown(wait=True)
                self._executor = None
                self._owns_executor = False
        outcomes = sorted((r for r in results if r is not None), key=lambda o: o.index)
        result = McStudyResult(
            study_id=self.config.study_id,
            requested=total,
            outcomes=outcomes,
            incomplete=len(outcomes) < total or any(not o.ok for o in outcomes),
        )
        if result.incomplete:
            LOGGER.warning(
                "Study %s incomplete: completed=%s failed=%s of %s",
                self.config.study_id,
                len(outcomes),
                result.failed,
                total,
            )
        result.write(self._store)
        return result


async def run_mc_study(
    config: StudyConfig,
    *,
    workers: int = 1,
    metrics: Optional[MetricsCollector] = None,
    store: Optional[ResultStore] = None,
) -> McStudyResult:
    runtime = StudyRuntime(config=config, workers=workers, metrics=metrics, store=store)
    return await runtime.run()


@dataclass
class ConvergenceResult:
    rows: List[Tuple[int, float]]
    slope: Optional[float]

    @property
    def slope_defined(self) -> bool:
        return self.slope is not None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["n", "median_error"])


def loglog_slope(rows: Sequence[Tuple[int, float]]) -> Optional[float]:
    """Least-squares slope of log(error) on log(n); None with fewer than two usable rows."""
    usable = [(n, e) for n, e in rows if n > 0 and e > 0 and np.isfinite(e)]
    if len(usable) < 2:
        return None
    log_n = np.log([n for n, _ in usable])
    log_e = np.log([e for _, e in usable])
    slope, _ = np.polyfit(log_n, log_e, 1)
    return float(slope)


def convergence_diagnostic(
    estimand: str,
    n_list: Sequence[int],
    s_small: int,
    *,
    study: Optional[StudyConfig] = None,
    norm: str = "sup",
) -> ConvergenceResult:
    """Median pipeline grid error over ``s_small`` replications for every sample size."""
    if list(n_list) != sorted(set(n_list)) or not n_list:
        raise EstimationError("invalid_input", "sample sizes must be a nonempty increasing list")
    if s_small < 1:
        raise EstimationError("invalid_input", "replication count must be >= 1")
    base = study or StudyConfig()
    rows: List[Tuple[int, float]] = []
    for n in n_list:
        cfg = StudyConfig(
            replications=s_small,
            n=int(n),
            seed=base.seed,
            variant=base.variant,
            boxes=base.boxes,
            error_box=base.error_box,
            density=base.density,
            numerator=base.numerator,
            study_id=f"{base.study_id}-n{n}",
        )
        errors = [replication_error(cfg, index, estimand, norm) for index in range(s_small)]
        rows.append((int(n), float(np.median(errors))))
        LOGGER.info("Convergence estimand=%s n=%s median_error=%.5f", estimand, n, rows[-1][1])
    slope = loglog_slope(rows)
    if slope is None:
        LOGGER.info("Convergence slope undefined for %s sample size(s)", len(rows))
    return ConvergenceResult(rows, slope)
