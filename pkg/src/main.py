"""Command-line entry point: `crimegraph <subcommand> [flags]`."""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import structlog
from pydantic import ValidationError

from src.config import Settings, load_settings
from src.models.pipeline import GraphFormat, PipelineConfig
from src.services import pipeline
from src.services.analysis import analyze
from src.services.communities import load_communities, save_communities
from src.services.export import export_geojson, write_community_filter, write_report
from src.services.geo import build_spatial_index
from src.services.ingest.interchange import load_graph, save_graph
from src.services.mapping import map_crimes, save_layer
from src.utils.validators import (
    ConfigurationError,
    CrimeGraphError,
    PipelineStageError,
    UsageError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

logger = structlog.get_logger()


def configure_logging(settings: Settings) -> None:
    """Structured logging to stderr; stdout carries command output only."""
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.JSONRenderer()
            if settings.log_format == "json"
            else structlog.dev.ConsoleRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(settings.log_level.upper())
        ),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


class _ArgumentParser(argparse.ArgumentParser):
    """Argument errors exit with the usage code instead of argparse's 2."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_flags() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key-value settings file")
    common.add_argument(
        "--graph", metavar="PATH", dest="graph_path", help="OSM XML or crimegraph-v1 file"
    )
    common.add_argument(
        "--graph-format", choices=[f.value for f in GraphFormat], dest="graph_format"
    )
    common.add_argument("--crimes", metavar="PATH", dest="crimes_path", help="crime CSV file")
    common.add_argument(
        "--types", metavar="A,B,C", dest="crime_types", help="crime types to analyze"
    )
    common.add_argument("--bbox", metavar="S,W,N,E", help="keep crimes inside this box")
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=["ignore", "self_loop"], dest="node_weight_mode")
    common.add_argument("--self-loop-scale", type=float, dest="self_loop_scale")
    common.add_argument("--min-size", type=int, dest="min_size", help="default 100")
    common.add_argument("--top-k", type=int, dest="top_k", help="default 5")
    common.add_argument("--variant", choices=["normalized", "raw"], dest="similarity_variant")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", metavar="DIR", dest="out_dir", help="artifact directory")
    common.add_argument(
        "--include-none",
        action="store_const",
        const=True,
        dest="geojson_include_none",
        help="export nodes outside every selected community too",
    )
    common.add_argument(
        "--community-filter",
        action="store_const",
        const=True,
        dest="community_filter_tsv",
        help="write the crime average and size of every community",
    )
    common.add_argument("--log-level", dest="log_level")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="crimegraph",
        description="Street-network crime mapping and criminal community analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _common_flags()
    for name, help_text in (
        ("build", "build the street graph and write graph.tsv"),
        ("map", "map crimes onto graph.tsv and write one layer per type"),
        ("detect", "detect communities for every layer"),
        ("analyze", "filter communities and write the report and overlay"),
        ("export", "write overlay.geojson from persisted communities"),
        ("run", "run the full pipeline"),
    ):
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _settings_from_args(args: argparse.Namespace) -> Settings:
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config") and value is not None
    }
    return load_settings(args.config, **overrides)


def _require(value: object, flag: str) -> None:
    if not value:
        raise ConfigurationError(f"{flag} is required for this command")


def _pipeline_config(settings: Settings) -> PipelineConfig:
    _require(settings.crime_types_list, "--types")
    cfg = PipelineConfig.from_settings(settings)
    pipeline.check_slugs(cfg.crime_types)
    return cfg


def cmd_build(settings: Settings) -> None:
    _require(settings.graph_path, "--graph")
    g, removed = pipeline.load_street_graph(
        Path(settings.graph_path or ""),
        GraphFormat(settings.graph_format),
        settings.highway_classes_set,
    )
    path = pipeline.graph_file(Path(settings.out_dir))
    save_graph(g, path)
    print(f"graph: {len(g)} nodes, {len(g.edges)} edges, {removed} removed -> {path}")


def cmd_map(settings: Settings) -> None:
    _require(settings.crimes_path, "--crimes")
    cfg = _pipeline_config(settings)
    g = load_graph(pipeline.graph_file(cfg.out_dir))
    records, stats = pipeline.load_crimes(cfg)
    index = build_spatial_index(list(g.nodes.items()), cell_m=cfg.grid_cell_m)
    for t in cfg.crime_types:
        layer = map_crimes(g, records, t, index=index, workers=cfg.workers)
        save_layer(layer, pipeline.layer_file(cfg.out_dir, t))
        print(f"{t}: {layer.total_mapped} crimes on {len(layer.counts)} nodes")
    print(f"rows: {stats.total} read, {stats.rejected_total} rejected")


def cmd_detect(settings: Settings) -> None:
    cfg = _pipeline_config(settings)
    g = load_graph(pipeline.graph_file(cfg.out_dir))
    layers = pipeline.read_layers(cfg, g)
    sets = pipeline.detect_all(g, layers, cfg.detection, cfg.workers)
    for t, cs in sets.items():
        save_communities(cs, pipeline.communities_file(cfg.out_dir, t))
        print(f"{t}: {len(cs)} communities, modularity {cs.modularity:.6f}")
    if cfg.topology_baseline:
        topology = pipeline.detect_topology(g, layers, cfg.detection)
        save_communities(topology, pipeline.communities_file(cfg.out_dir, pipeline.TOPOLOGY_LABEL))
        print(f"topology-only: {len(topology)} communities")


def _analyze_persisted(settings: Settings, write_reports: bool) -> None:
    cfg = _pipeline_config(settings)
    g = load_graph(pipeline.graph_file(cfg.out_dir))
    layers = pipeline.read_layers(cfg, g)
    sets = pipeline.read_communities(cfg, g)
    stats, selections = pipeline.select_all(layers, sets, cfg)
    report, overlay = analyze(g, layers, sets, stats, selections, cfg.similarity_variant)
    if write_reports:
        topo_path = pipeline.communities_file(cfg.out_dir, pipeline.TOPOLOGY_LABEL)
        if topo_path.is_file():
            report.topology_communities = len(load_communities(topo_path))
        txt, _ = write_report(report, cfg.out_dir)
        print(f"report -> {txt}")
        if cfg.community_filter_tsv:
            path = write_community_filter(stats, selections, cfg.out_dir)
            print(f"community filter -> {path}")
    geojson = cfg.out_dir / "overlay.geojson"
    fc = export_geojson(
        g, overlay, layers, geojson, communities=sets, include_none=cfg.geojson_include_none
    )
    print(f"overlay: {len(fc.features)} features -> {geojson}")


def cmd_run(settings: Settings) -> None:
    _require(settings.graph_path, "--graph")
    _require(settings.crimes_path, "--crimes")
    result = pipeline.run_pipeline(_pipeline_config(settings))
    for t in result.report.types:
        print(f"{t.crime_type}: {t.crimes_mapped} crimes, {t.communities_detected} communities")
    print(f"artifacts -> {Path(settings.out_dir)}")


COMMANDS = {
    "build": cmd_build,
    "map": cmd_map,
    "detect": cmd_detect,
    "analyze": lambda s: _analyze_persisted(s, write_reports=True),
    "export": lambda s: _analyze_persisted(s, write_reports=False),
    "run": cmd_run,
}


def _exit_code(error: BaseException) -> int:
    if isinstance(error, PipelineStageError):
        return _exit_code(error.cause)
    if isinstance(error, (UsageError, ValidationError)):
        return EXIT_USAGE
    return EXIT_DATA


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        settings = _settings_from_args(args)
    except (ValidationError, FileNotFoundError) as e:
        print(f"crimegraph: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(settings)

    try:
        COMMANDS[args.command](settings)
    except (CrimeGraphError, ValidationError, OSError, ValueError) as e:
        code = _exit_code(e)
        logger.error(
            "command_failed",
            command=args.command,
            error_type=type(e).__name__,
            error=str(e),
            exit_code=code,
        )
        print(f"crimegraph: {e}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
