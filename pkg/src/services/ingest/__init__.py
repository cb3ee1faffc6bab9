"""Map and crime source parsing.

The graph interchange format lives in ``src.services.ingest.interchange``.
"""

from src.services.ingest.crimes import CrimeRecord, ParseStats, category_counts, parse_crime_csv
from src.services.ingest.osm import RawMapExtract, Way, parse_osm_xml

__all__ = [
    "CrimeRecord",
    "ParseStats",
    "RawMapExtract",
    "Way",
    "category_counts",
    "parse_crime_csv",
    "parse_osm_xml",
]
