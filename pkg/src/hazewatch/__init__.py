"""Peatland-fire haze signals in geotagged social media posts."""

from .model import FireHotspot, GeoPoint, GeoPost, LocalCalendar
from .ruledsl import Taxonomy, classify, load_taxonomies, matches, parse_rule

__version__ = "0.1.0"

__all__ = [
    "FireHotspot",
    "GeoPoint",
    "GeoPost",
    "LocalCalendar",
    "Taxonomy",
    "classify",
    "load_taxonomies",
    "matches",
    "parse_rule",
]
