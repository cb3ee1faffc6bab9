"""Pipeline orchestration: ingest, graph, mapping, detection, analysis, export."""

import shutil
import time
from collections.abc import Callable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import TypeVar

import structlog

from src.models.pipeline import DetectionConfig, GraphFormat, NodeWeightMode, PipelineConfig
from src.models.report import AnalysisReport
from src.services.analysis import analyze, conservation_summary
from src.services.communities import (
    Community,
    CommunitySet,
    TopCommunities,
    community_stats,
    detect_communities,
    distance_to_affinity,
    filter_top_communities,
    load_communities,
    save_communities,
)
from src.services.export import (
    COMMUNITY_FILTER_FILE,
    export_geojson,
    write_community_filter,
    write_report,
)
from src.services.geo import build_spatial_index
from src.services.graph import (
    StreetGraph,
    build_street_graph,
    largest_component,
    undirected_projection,
)
from src.services.ingest import (
    CrimeRecord,
    ParseStats,
    category_counts,
    parse_crime_csv,
    parse_osm_xml,
)
from src.services.ingest.interchange import load_graph, save_graph
from src.services.mapping import CrimeLayer, combine_layers, load_layer, map_crimes, save_layer
from src.utils import metrics
from src.utils.validators import (
    ConfigurationError,
    LayerMismatchError,
    PipelineStageError,
    safe_artifact_name,
)

logger = structlog.get_logger(__name__)

T = TypeVar("T")

TOPOLOGY_LABEL = "(topology)"
TOPOLOGY_SLUG = "_topology"


def graph_file(out_dir: Path) -> Path:
    return out_dir / "graph.tsv"


def layer_file(out_dir: Path, crime_type: str) -> Path:
    return out_dir / "layers" / f"{safe_artifact_name(crime_type)}.tsv"


def communities_file(out_dir: Path, crime_type: str) -> Path:
    slug = TOPOLOGY_SLUG if crime_type == TOPOLOGY_LABEL else safe_artifact_name(crime_type)
    return out_dir / "communities" / f"{slug}.tsv"


def check_slugs(crime_types: Sequence[str]) -> None:
    """Two types must not share an artifact file name."""
    seen: dict[str, str] = {}
    for t in crime_types:
        slug = safe_artifact_name(t)
        if slug in seen or slug == TOPOLOGY_SLUG:
            other = seen.get(slug, TOPOLOGY_LABEL)
            raise ConfigurationError(
                f"Crime types '{other}' and '{t}' map to the same file '{slug}'"
            )
        seen[slug] = t


@contextmanager
def stage(name: str, **context: object) -> Iterator[None]:
    """Time a stage, bind its name to the log context and wrap failures."""
    start = time.perf_counter()
    with structlog.contextvars.bound_contextvars(stage=name, **context):
        try:
            yield
        except PipelineStageError:
            raise
        except Exception as e:
            metrics.stage_failures_total.labels(stage=name).inc()
            logger.error("pipeline_stage_failed", error_type=type(e).__name__, error=str(e))
            raise PipelineStageError(name, e) from e
        finally:
            metrics.stage_duration_seconds.labels(stage=name).observe(time.perf_counter() - start)


def _per_type(
    crime_types: Sequence[str], fn: Callable[[str], T], workers: int
) -> dict[str, T]:
    """Run fn for every type, in parallel when workers > 1; results keep type order."""
    if workers > 1 and len(crime_types) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, crime_types))
    else:
        results = [fn(t) for t in crime_types]
    return dict(zip(crime_types, results, strict=True))


# Stage implementations, shared by the subcommands


def load_street_graph(
    path: Path, graph_format: GraphFormat, highway_classes: frozenset[str]
) -> tuple[StreetGraph, int]:
    """Read the map, project it to an undirected graph and keep its largest component.

    Returns the graph and the number of nodes outside the largest component.
    """
    if graph_format.resolve(path) is GraphFormat.OSM:
        g = build_street_graph(parse_osm_xml(path, highway_classes))
    else:
        g = load_graph(path)
    projected = undirected_projection(g)
    connected = largest_component(projected)
    return connected, len(projected) - len(connected)


def load_crimes(cfg: PipelineConfig) -> tuple[list[CrimeRecord], ParseStats]:
    """Parse the crime CSV and report how many records each requested type has."""
    records, stats = parse_crime_csv(cfg.crimes_path, cfg.columns, cfg.bbox)
    per_type = category_counts(records)
    requested = {t: per_type.get(t, 0) for t in cfg.crime_types}
    logger.info("crime_types_counted", requested=requested, categories=len(per_type))
    for t, n in requested.items():
        if n == 0:
            logger.warning("crime_type_absent", crime_type=t)
    metrics.csv_rows_total.labels(outcome="accepted").inc(stats.accepted)
    for reason, n in stats.rejected.items():
        metrics.csv_rows_total.labels(outcome=reason).inc(n)
    return records, stats


def map_all(
    g: StreetGraph, records: list[CrimeRecord], cfg: PipelineConfig
) -> dict[str, CrimeLayer]:
    """One layer per configured crime type over a shared spatial index."""
    index = build_spatial_index(list(g.nodes.items()), cell_m=cfg.grid_cell_m)

    def one(crime_type: str) -> CrimeLayer:
        with structlog.contextvars.bound_contextvars(crime_type=crime_type):
            layer = map_crimes(g, records, crime_type, index=index, workers=1)
        metrics.crimes_mapped_total.labels(crime_type=crime_type).inc(layer.total_mapped)
        return layer

    return _per_type(cfg.crime_types, one, cfg.workers)


def detect_all(
    g: StreetGraph,
    layers: Mapping[str, CrimeLayer],
    detection: DetectionConfig,
    workers: int,
) -> dict[str, CommunitySet]:
    ag = distance_to_affinity(g)

    def one(crime_type: str) -> CommunitySet:
        with structlog.contextvars.bound_contextvars(crime_type=crime_type):
            cs = detect_communities(ag, layers[crime_type], detection)
        metrics.communities_detected.labels(crime_type=crime_type).set(len(cs))
        return cs

    return _per_type(list(layers), one, workers)


def detect_topology(
    g: StreetGraph, layers: Mapping[str, CrimeLayer], detection: DetectionConfig
) -> CommunitySet:
    """Crime-blind baseline: ignore mode over the combined layer."""
    combined = combine_layers(list(layers.values()), TOPOLOGY_LABEL)
    baseline = detection.model_copy(update={"node_weight_mode": NodeWeightMode.IGNORE})
    with structlog.contextvars.bound_contextvars(crime_type=TOPOLOGY_LABEL):
        cs = detect_communities(distance_to_affinity(g), combined, baseline)
    metrics.communities_detected.labels(crime_type=TOPOLOGY_LABEL).set(len(cs))
    return cs


def select_all(
    layers: Mapping[str, CrimeLayer],
    community_sets: Mapping[str, CommunitySet],
    cfg: PipelineConfig,
) -> tuple[dict[str, list[Community]], dict[str, TopCommunities]]:
    stats: dict[str, list[Community]] = {}
    selections: dict[str, TopCommunities] = {}
    for t, cs in community_sets.items():
        with structlog.contextvars.bound_contextvars(crime_type=t):
            stats[t] = community_stats(cs, layers[t])
            selections[t] = filter_top_communities(stats[t], cfg.filter.min_size, cfg.filter.k)
        logger.info(
            "communities_filtered",
            crime_type=t,
            detected=len(cs),
            qualifying=len(selections[t].communities),
            selected_nodes=len(selections[t].node_ids),
        )
    return stats, selections


def read_layers(cfg: PipelineConfig, g: StreetGraph) -> dict[str, CrimeLayer]:
    layers: dict[str, CrimeLayer] = {}
    for t in cfg.crime_types:
        layer = load_layer(layer_file(cfg.out_dir, t))
        layer.check_graph(g)
        layers[t] = layer
    return layers


def read_communities(cfg: PipelineConfig, g: StreetGraph) -> dict[str, CommunitySet]:
    sets: dict[str, CommunitySet] = {}
    for t in cfg.crime_types:
        cs = load_communities(communities_file(cfg.out_dir, t))
        if cs.graph_fingerprint != g.fingerprint:
            raise LayerMismatchError(
                f"Communities of '{t}' belong to graph {cs.graph_fingerprint}, not {g.fingerprint}"
            )
        sets[t] = cs
    return sets


@dataclass
class PipelineResult:
    """Outputs of a full run."""

    report: AnalysisReport
    graph: StreetGraph
    layers: dict[str, CrimeLayer]
    community_sets: dict[str, CommunitySet]
    selections: dict[str, TopCommunities]
    overlay: dict[int, tuple[str, ...]]
    artifacts: list[Path] = field(default_factory=list)


class _ArtifactTracker:
    """Remembers files written during a run so a failed run can remove them."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.created_dirs: list[Path] = []
        self.files: list[Path] = []

    def prepare(self) -> None:
        for d in (self.out_dir, self.out_dir / "layers", self.out_dir / "communities"):
            if not d.exists():
                d.mkdir(parents=True)
                self.created_dirs.append(d)

    def track(self, path: Path) -> Path:
        self.files.append(path)
        return path

    def rollback(self) -> None:
        for path in self.files:
            path.unlink(missing_ok=True)
        for d in reversed(self.created_dirs):
            shutil.rmtree(d, ignore_errors=True)
        logger.warning("partial_outputs_removed", files=len(self.files), out_dir=str(self.out_dir))


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """
    Run every stage and write all artifacts into cfg.out_dir.

    Raises:
        PipelineStageError: If a stage fails; files written by the run are removed
    """
    out = cfg.out_dir
    tracker = _ArtifactTracker(out)
    try:
        with stage("configure"):
            check_slugs(cfg.crime_types)
            tracker.prepare()

        with stage("ingest_crimes"):
            records, parse_stats = load_crimes(cfg)

        with stage("build_graph"):
            g, removed = load_street_graph(cfg.graph_path, cfg.graph_format, cfg.highway_classes)
            metrics.graph_nodes.set(len(g))
            save_graph(g, tracker.track(graph_file(out)))
            logger.info("graph_ready", nodes=len(g), edges=len(g.edges), removed_nodes=removed)

        with stage("map"):
            layers = map_all(g, records, cfg)
            for t, layer in layers.items():
                save_layer(layer, tracker.track(layer_file(out, t)))

        with stage("detect"):
            community_sets = detect_all(g, layers, cfg.detection, cfg.workers)
            for t, cs in community_sets.items():
                save_communities(cs, tracker.track(communities_file(out, t)))
            topology: CommunitySet | None = None
            if cfg.topology_baseline:
                topology = detect_topology(g, layers, cfg.detection)
                save_communities(topology, tracker.track(communities_file(out, TOPOLOGY_LABEL)))

        with stage("filter"):
            stats, selections = select_all(layers, community_sets, cfg)

        with stage("analyze"):
            report, overlay = analyze(
                g, layers, community_sets, stats, selections, cfg.similarity_variant
            )
            report.removed_component_nodes = removed
            report.topology_communities = len(topology) if topology is not None else None
            report.conservation = conservation_summary(
                parse_stats.total, dict(parse_stats.rejected), layers, parse_stats.accepted
            )
            if not report.conservation.balanced:
                raise AssertionError(f"Row accounting does not balance: {report.conservation}")
            logger.info(
                "communities_summary",
                topology=report.topology_communities,
                **{t: len(cs) for t, cs in community_sets.items()},
            )

        with stage("export"):
            tracker.track(out / "report.txt")
            tracker.track(out / "report.tsv")
            write_report(report, out)
            export_geojson(
                g,
                overlay,
                layers,
                tracker.track(out / "overlay.geojson"),
                communities=community_sets,
                include_none=cfg.geojson_include_none,
            )
            if cfg.community_filter_tsv:
                tracker.track(out / COMMUNITY_FILTER_FILE)
                write_community_filter(stats, selections, out)
            metrics.write_metrics(tracker.track(out / "metrics.prom"))
    except PipelineStageError:
        tracker.rollback()
        raise

    logger.info("pipeline_completed", out_dir=str(out), artifacts=len(tracker.files))
    return PipelineResult(
        report=report,
        graph=g,
        layers=layers,
        community_sets=community_sets,
        selections=selections,
        overlay=overlay,
        artifacts=list(tracker.files),
    )
