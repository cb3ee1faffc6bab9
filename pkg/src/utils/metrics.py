"""Prometheus metrics for pipeline runs."""

from pathlib import Path

from prometheus_client import (
    REGISTRY,
    CollectorRegistry,
    Counter,
    Gauge,
    Histogram,
    write_to_textfile,
)

# Ingest counters
csv_rows_total = Counter(
    "crimegraph_csv_rows_total",
    "Crime CSV rows read, by outcome",
    ["outcome"],  # accepted or a rejection reason
)

crimes_mapped_total = Counter(
    "crimegraph_crimes_mapped_total",
    "Crimes assigned to a street node",
    ["crime_type"],
)

# Detection results
communities_detected = Gauge(
    "crimegraph_communities_detected",
    "Communities found by the last detection run",
    ["crime_type"],
)

graph_nodes = Gauge(
    "crimegraph_graph_nodes",
    "Nodes of the analyzed street graph",
)

# Stage timing (in seconds)
stage_duration_seconds = Histogram(
    "crimegraph_stage_duration_seconds",
    "Wall time of a pipeline stage",
    ["stage"],
    buckets=[0.01, 0.05, 0.1, 0.5, 1, 2, 5, 10, 30, 60, 120, 300],
)

stage_failures_total = Counter(
    "crimegraph_stage_failures_total",
    "Pipeline stages that raised an error",
    ["stage"],
)


def write_metrics(path: str | Path, registry: CollectorRegistry = REGISTRY) -> None:
    """Dump a registry in the Prometheus text format."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(path), registry)

