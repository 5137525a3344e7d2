"""Descriptive analytics: subject network, expertise weights, keywords, mosaic layout."""
from .expertise import ExpertiseAssignment, ExpertiseWeights, expertise_weights, field_correlation, staff_expertise
from .keywords import extract_keywords, keyword_overlap, load_stopwords, read_corpus, tokenize
from .mosaic import ContingencyTable3, MosaicRect, mosaic_layout
from .network import BipartiteGraph, build_jel_network, export_network, import_network_json

__all__ = [
    "BipartiteGraph",
    "build_jel_network",
    "export_network",
    "import_network_json",
    "ExpertiseAssignment",
    "ExpertiseWeights",
    "expertise_weights",
    "staff_expertise",
    "field_correlation",
    "tokenize",
    "load_stopwords",
    "read_corpus",
    "extract_keywords",
    "keyword_overlap",
    "ContingencyTable3",
    "MosaicRect",
    "mosaic_layout",
]
