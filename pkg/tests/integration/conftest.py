"""Fixtures writing synthetic city inputs to disk."""

from dataclasses import dataclass
from pathlib import Path

import pytest

from src.models.ingest import ColumnMapping
from src.models.pipeline import DetectionConfig, FilterConfig, PipelineConfig
from src.services.ingest.interchange import save_graph
from tests.testkit import Hotspot, SyntheticCity, make_city, write_crime_csv

CRIME_TYPES = ("ASSAULT", "LARCENY/THEFT", "VANDALISM")


@dataclass
class CityFiles:
    city: SyntheticCity
    graph: Path
    crimes: Path
    out: Path


def _hotspots() -> list[Hotspot]:
    return [
        Hotspot(center=1000 + 4 * 20 + 4, radius=2, crime_type="ASSAULT", rate=6.0),
        Hotspot(center=1000 + 15 * 20 + 5, radius=1, crime_type="LARCENY/THEFT", rate=5.0),
        Hotspot(center=1000 + 10 * 20 + 15, radius=1, crime_type="VANDALISM", rate=4.0),
    ]


@pytest.fixture
def city_files(tmp_path) -> CityFiles:
    """20x20 grid city with one hotspot per type, saved as graph.tsv input and crimes.csv."""
    city = make_city(20, 20, _hotspots(), seed=11, background_rate=0.05)
    inputs = tmp_path / "inputs"
    graph = inputs / "city.tsv"
    save_graph(city.graph, graph)
    crimes = write_crime_csv(city.crimes, inputs / "crimes.csv")
    return CityFiles(city, graph, crimes, tmp_path / "out")


@pytest.fixture
def make_config(city_files):
    """Factory for PipelineConfig over the city files; keyword overrides win."""

    def factory(**overrides) -> PipelineConfig:
        kwargs = {
            "graph_path": city_files.graph,
            "crimes_path": city_files.crimes,
            "columns": ColumnMapping(),
            "crime_types": list(CRIME_TYPES),
            "highway_classes": frozenset({"residential"}),
            "detection": DetectionConfig(seed=42),
            "filter": FilterConfig(min_size=10, k=3),
            "out_dir": city_files.out,
            "workers": 1,
        }
        kwargs.update(overrides)
        return PipelineConfig(**kwargs)

    return factory


@pytest.fixture
def crime_types() -> list[str]:
    return list(CRIME_TYPES)
