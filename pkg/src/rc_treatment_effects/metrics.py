"""Metrics collection primitives for Monte-Carlo studies."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol

from prometheus_client import CollectorRegistry, Counter, Histogram, start_http_server


@dataclass
class ReplicationEvent:
    """Structured metrics payload for one replication."""

    study_id: str
    replication: int
    seed: int
    status: str
    duration_ms: float
    sample_size: int
    error_code: Optional[str] = None


class MetricsCollector(Protocol):
    """Protocol for collecting metrics events."""

    def record(self, event: ReplicationEvent) -> None:
        """Persist or emit the metrics event."""


class LoggingMetricsCollector(MetricsCollector):
    """Default metrics collector that logs structured events."""

    def __init__(self, logger: Optional[logging.Logger] = None) -> None:
        self._logger = logger or logging.getLogger("rc_treatment_effects.metrics")

    def record(self, event: ReplicationEvent) -> None:
        payload = {
            "study_id": event.study_id,
            "replication": event.replication,
            "seed": event.seed,
            "status": event.status,
            "duration_ms": round(event.duration_ms, 3),
            "sample_size": event.sample_size,
            "error_code": event.error_code,
        }
        self._logger.info("replication_metrics", extra={"metrics": payload})


class PrometheusMetricsCollector(MetricsCollector):
    """Metrics collector backed by Prometheus client library."""

    def __init__(
        self,
        *,
        study_id: str,
        port: Optional[int] = None,
        registry: Optional[CollectorRegistry] = None,
    ) -> None:
        self._study_id = study_id
        self._registry = registry or CollectorRegistry()
        self._events = Counter(
            "rcte_replications_total",
            "Total Monte-Carlo replications",
            ["study_id", "status", "error_code"],
            registry=self._registry,
        )
        self._duration = Histogram(
            "rcte_replication_duration_seconds",
            "Replication wall-clock duration",
            ["study_id", "status"],
            registry=self._registry,
            buckets=(0.5, 1, 2.5, 5, 10, 30, 60, 120, 300, 600),
        )
        self._sample_size = Histogram(
            "rcte_replication_sample_size",
            "Observations per replication",
            ["study_id"],
            registry=self._registry,
            buckets=(1000, 2500, 5000, 10000, 20000, 40000, 100000),
        )
        if port is not None:
            start_http_server(port, registry=self._registry)

    @property
    def registry(self) -> CollectorRegistry:
        return self._registry

    def record(self, event: ReplicationEvent) -> None:
        study_id = event.study_id or self._study_id
        self._events.labels(
            study_id=study_id,
            status=event.status,
            error_code=event.error_code or "none",
        ).inc()
        self._duration.labels(study_id=study_id, status=event.status).observe(max(event.duration_ms / 1000.0, 0.0))
        self._sample_size.labels(study_id=study_id).observe(max(float(event.sample_size), 0.0))


def create_metrics_collector(backend: str, *, study_id: str, port: Optional[int] = None) -> MetricsCollector:
    if backend == "prometheus":
        return PrometheusMetricsCollector(study_id=study_id, port=port)
    return LoggingMetricsCollector()
