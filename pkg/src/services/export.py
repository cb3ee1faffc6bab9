"""GeoJSON overlay export and report rendering."""

from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import structlog

from src.models.geojson import Feature, FeatureCollection, PointGeometry
from src.models.report import AnalysisReport, CommunityRow
from src.services.analysis import TABLE_ROWS, overlay_label
from src.services.communities.louvain import CommunitySet
from src.services.communities.stats import Community, TopCommunities
from src.services.graph import StreetGraph
from src.services.ingest.interchange import write_artifact
from src.services.mapping import CrimeLayer
from src.utils.validators import ExportError

logger = structlog.get_logger(__name__)

REPORT_MAGIC = "crimegraph-report-v1"
COMMUNITY_FILTER_MAGIC = "crimegraph-community-filter-v1"
COMMUNITY_FILTER_FILE = "community_filter.tsv"

STATUS_SELECTED = "selected"
STATUS_ELIGIBLE = "eligible"
STATUS_SMALL = "small"


def _write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ExportError(f"Cannot write {path}: {e}") from e


def build_feature_collection(
    g: StreetGraph,
    overlay: Mapping[int, Sequence[str]],
    layers: Mapping[str, CrimeLayer],
    communities: Mapping[str, CommunitySet] | None = None,
    include_none: bool = False,
) -> FeatureCollection:
    """One Point feature per overlay node (every node when include_none is set)."""
    unknown = [n for n in overlay if n not in g]
    if unknown:
        raise ValueError(f"Overlay holds {len(unknown)} node(s) absent from the graph")
    communities = communities or {}
    node_ids: Iterable[int] = g.nodes if include_none else overlay
    features = []
    for n in sorted(node_ids):
        p = g.nodes[n]
        cls = overlay.get(n, ())
        features.append(
            Feature(
                geometry=PointGeometry(coordinates=(p.lon, p.lat)),
                properties={
                    "node_id": n,
                    "overlay_class": overlay_label(cls),
                    "crime_counts": {t: layer.count(n) for t, layer in layers.items()},
                    "communities": {
                        t: cs.partition.get(n) for t, cs in communities.items()
                    },
                },
            )
        )
    return FeatureCollection(features=features)


def export_geojson(
    g: StreetGraph,
    overlay: Mapping[int, Sequence[str]],
    layers: Mapping[str, CrimeLayer],
    path: str | Path,
    communities: Mapping[str, CommunitySet] | None = None,
    include_none: bool = False,
) -> FeatureCollection:
    """
    Write the overlay as an RFC 7946 FeatureCollection; coordinates are [lon, lat].

    Raises:
        ExportError: If the file cannot be written
    """
    fc = build_feature_collection(g, overlay, layers, communities, include_none)
    _write_text(path, fc.model_dump_json() + "\n")
    logger.info("geojson_exported", path=str(path), features=len(fc.features))
    return fc


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.6f}"


def render_community_table(rows: Iterable[CommunityRow]) -> list[str]:
    """Community table: header `Avg<TAB>#`, then `avg<TAB>size` rows."""
    lines = ["Avg\t#"]
    lines.extend(f"{row.crime_avg:.2f}\t{row.size}" for row in rows)
    return lines


def render_report(report: AnalysisReport) -> str:
    """Human-readable report: community tables, scores and similarities."""
    lines = ["Crime community analysis", ""]
    lines.append(
        f"Graph: {report.graph_nodes} nodes, {report.graph_edges} edges "
        f"({report.removed_component_nodes} nodes outside the largest component removed)"
    )
    detected = [f"{t.crime_type} {t.communities_detected}" for t in report.types]
    if report.topology_communities is not None:
        detected.insert(0, f"topology-only {report.topology_communities}")
    lines.append("Communities detected: " + ", ".join(detected))
    lines.append("")

    lines.append(f"Communities with the highest crime average (top {TABLE_ROWS})")
    for t in report.types:
        lines.append("")
        lines.append(f"{t.crime_type}")
        lines.extend(render_community_table(t.top_communities))
    lines.append("")

    lines.append("Selected communities")
    for t in report.types:
        ids = ", ".join(str(row.community_id) for row in t.selected) or "-"
        note = " (fewer than k qualify)" if t.filter_warning else ""
        p = t.presence
        lines.append(
            f"{t.crime_type}: communities {ids}{note}; {p.nodes} nodes, "
            f"{p.criminal} ({p.criminal_pct:.2f}%) with at least one crime"
        )
    lines.append("")

    lines.append("Homogeneity and Completeness scores")
    lines.append("Crime type\tHomogeneity\tCompleteness")
    lines.extend(
        f"{t.crime_type}\t{_fmt(t.homogeneity)}\t{_fmt(t.completeness)}" for t in report.types
    )
    lines.append("")

    lines.append(f"Similarity (default variant: {report.similarity_variant}; raw variant in km)")
    lines.append("Type A\tType B\tNormalized\tRaw")
    lines.extend(
        f"{s.type_a}\t{s.type_b}\t{_fmt(s.normalized)}\t{_fmt(s.raw)}"
        for s in report.similarities
    )
    lines.append("")

    lines.append(f"Overlay classes ({report.crime_hubs} crime hub nodes)")
    lines.append("Class\tNodes")
    lines.extend(f"{c.overlay_class}\t{c.nodes}" for c in report.overlay_classes)

    if report.conservation is not None:
        c = report.conservation
        lines.append("")
        lines.append("Row accounting")
        lines.append(f"rows_total\t{c.rows_total}")
        lines.extend(f"rejected.{reason}\t{n}" for reason, n in c.rows_rejected.items())
        lines.extend(f"mapped.{t}\t{n}" for t, n in c.crimes_mapped.items())
        lines.append(f"unanalyzed\t{c.crimes_unanalyzed}")
    return "\n".join(lines) + "\n"


def report_values(report: AnalysisReport) -> list[tuple[str, str]]:
    """Machine-readable score name → value pairs (6 decimals)."""
    values: list[tuple[str, str]] = []
    for t in report.types:
        values.append((f"homogeneity[{t.crime_type}]", _fmt(t.homogeneity)))
        values.append((f"completeness[{t.crime_type}]", _fmt(t.completeness)))
        values.append((f"modularity[{t.crime_type}]", _fmt(t.modularity)))
    for s in report.similarities:
        values.append((f"similarity.normalized[{s.type_a},{s.type_b}]", _fmt(s.normalized)))
        values.append((f"similarity.raw[{s.type_a},{s.type_b}]", _fmt(s.raw)))
    return values


def render_report_tsv(report: AnalysisReport) -> str:
    """TSV report: one `[section]` per table, then the key-value block."""
    lines = [f"{REPORT_MAGIC}", f"#\tsimilarity_variant\t{report.similarity_variant}"]
    lines.append(f"#\tgraph_nodes\t{report.graph_nodes}")
    lines.append(f"#\tgraph_edges\t{report.graph_edges}")
    if report.topology_communities is not None:
        lines.append(f"#\ttopology_communities\t{report.topology_communities}")

    for t in report.types:
        lines.append(f"[communities\t{t.crime_type}]")
        lines.extend(render_community_table(t.top_communities))
    lines.append("[scores]")
    lines.append("Crime type\tHomogeneity\tCompleteness")
    lines.extend(
        f"{t.crime_type}\t{_fmt(t.homogeneity)}\t{_fmt(t.completeness)}" for t in report.types
    )
    lines.append("[similarity]")
    lines.append("Type A\tType B\tNormalized\tRaw")
    lines.extend(
        f"{s.type_a}\t{s.type_b}\t{_fmt(s.normalized)}\t{_fmt(s.raw)}"
        for s in report.similarities
    )
    lines.append("[overlay]")
    lines.append("Class\tNodes")
    lines.extend(f"{c.overlay_class}\t{c.nodes}" for c in report.overlay_classes)
    lines.append("[values]")
    lines.extend(f"{key}\t{value}" for key, value in report_values(report))
    return "\n".join(lines) + "\n"


def write_report(report: AnalysisReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Write report.txt and report.tsv into out_dir."""
    out_dir = Path(out_dir)
    txt, tsv = out_dir / "report.txt", out_dir / "report.tsv"
    _write_text(txt, render_report(report))
    _write_text(tsv, render_report_tsv(report))
    logger.info("report_written", txt=str(txt), tsv=str(tsv))
    return txt, tsv


def community_filter_lines(
    stats: Mapping[str, Sequence[Community]], selections: Mapping[str, TopCommunities]
) -> list[str]:
    """
    Crime average against size for every detected community of every type.

    Status is `selected` for the top-k, `eligible` for the rest of the
    communities that reach min_size, and `small` otherwise.
    """
    lines = ["Crime type\tCommunity\tAvg\t#\tCrimes\tStatus"]
    for t, communities in stats.items():
        top = selections[t]
        chosen = {c.id for c in top.communities}
        for c in communities:
            if c.id in chosen:
                status = STATUS_SELECTED
            elif c.size >= top.min_size:
                status = STATUS_ELIGIBLE
            else:
                status = STATUS_SMALL
            lines.append(f"{t}\t{c.id}\t{c.crime_avg:.6f}\t{c.size}\t{c.crime_total}\t{status}")
    return lines


def write_community_filter(
    stats: Mapping[str, Sequence[Community]],
    selections: Mapping[str, TopCommunities],
    out_dir: str | Path,
) -> Path:
    """
    Write community_filter.tsv into out_dir.

    Raises:
        ExportError: If the file cannot be written
    """
    path = Path(out_dir) / COMMUNITY_FILTER_FILE
    first = next(iter(selections.values()), None)
    metadata = [("min_size", first.min_size), ("k", first.k)] if first else []
    lines = community_filter_lines(stats, selections)
    try:
        write_artifact(path, [COMMUNITY_FILTER_MAGIC], metadata, lines)
    except OSError as e:
        raise ExportError(f"Cannot write {path}: {e}") from e
    logger.info("community_filter_written", path=str(path), communities=len(lines) - 1)
    return path
