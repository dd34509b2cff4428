"""Routing-table summarization for keyword-based p2p data discovery."""

from .annotation import (
    AttributeRegistry,
    Descriptor,
    Query,
    StreamAnnotation,
    alpha_match,
    attr_match,
)
from .embedding import EmbeddingSet, fallback_embeddings, kmeans
from .estimator import est_alph_ns, est_hash_ns, gamma, omega
from .routing import (
    CodeSpace,
    RoutingTable,
    SummarizationConfig,
    rt_insert,
    rt_lookup,
)
from .simnet import Metrics, RunResult, Simulation, run_experiment
from .sumtree import (
    SumTree,
    build_alph,
    build_hash,
    build_meaning,
    deserialize_tree,
    grow_depth,
    hash_parent,
    scv_parent,
    serialize_tree,
)
from .world import gen_topology, gen_workload, place_streams, synth_corpus

__version__ = "0.1.0"
