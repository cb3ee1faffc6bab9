"""Synthetic cities with planted ground truth and brute-force oracles for tests."""

from tests.testkit.city import (
    Hotspot,
    SyntheticCity,
    duplicate_category,
    generate_grid_city,
    make_city,
    plant_hotspots,
    write_crime_csv,
)
from tests.testkit.oracles import (
    bfs_component_sizes,
    haversine_distance,
    oracle_entropy_scores,
    oracle_modularity,
    oracle_nearest,
    oracle_overlay_class_sizes,
    oracle_similarity_normalized,
    oracle_similarity_raw,
    set_partitions,
)

__all__ = [
    "Hotspot",
    "SyntheticCity",
    "bfs_component_sizes",
    "duplicate_category",
    "generate_grid_city",
    "haversine_distance",
    "make_city",
    "oracle_entropy_scores",
    "oracle_modularity",
    "oracle_nearest",
    "oracle_overlay_class_sizes",
    "oracle_similarity_normalized",
    "oracle_similarity_raw",
    "plant_hotspots",
    "set_partitions",
    "write_crime_csv",
]
