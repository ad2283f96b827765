"""Coopetition analysis of student-course affiliation data.

Pipeline: affiliation matrix -> Hamming similarity -> quantile cutoff ->
graph -> Louvain communities -> conductance / grade / label agreement,
plus a ForceAtlas2-style layout and a planted-partition generator.
"""

from __future__ import annotations

__version__ = "0.1.0"

from ._kernels import BACKEND
from .affiliation import (AffiliationMatrix, EntityMetadata, load_affiliation, load_metadata,
                          matrix_stats)
from .community import LouvainConfig, Partition, louvain, modularity
from .errors import (ConfigError, CoopetitionError, DataError, DivergenceError)
from .graph import Graph, build_graph, export_graph, read_graph_jsonl
from .layout import FA2Params, fa2_run, fa2_step
from .metrics import MetricsConfig, conductance, coopetition_report, label_agreement
from .similarity import (empirical_cdf, pairwise_distances, quantile_cutoff,
                         reciprocal_similarity, sparsify)
from .synthgen import SynthConfig, generate, preset

__all__ = [
    "BACKEND", "AffiliationMatrix", "EntityMetadata", "load_affiliation", "load_metadata",
    "matrix_stats", "LouvainConfig", "Partition", "louvain", "modularity", "ConfigError",
    "CoopetitionError", "DataError", "DivergenceError", "Graph", "build_graph", "export_graph",
    "read_graph_jsonl", "FA2Params", "fa2_run", "fa2_step", "MetricsConfig", "conductance",
    "coopetition_report", "label_agreement", "empirical_cdf", "pairwise_distances",
    "quantile_cutoff", "reciprocal_similarity", "sparsify", "SynthConfig", "generate", "preset",
]
