"""World construction for experiments: topology, corpora, placement,
and query workloads.  Everything is seeded and deterministic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .annotation import AttributeRegistry, Query, StreamAnnotation
from .embedding import EmbeddingSet, kmeans
from .errors import InfeasibleDegreeSequence, MissingEmbedding


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------


@dataclass
class Topology:
    n: int
    adj: list[list[int]]
    seed: int

    def degree(self, node: int) -> int:
        return len(self.adj[node])

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def bfs_order(self, start: int = 0) -> list[int]:
        seen = [False] * self.n
        order = []
        queue = [start]
        seen[start] = True
        while queue:
            nxt = []
            for v in queue:
                order.append(v)
                for w in self.adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        nxt.append(w)
            queue = nxt
        return order

    def is_connected(self) -> bool:
        return len(self.bfs_order(0)) == self.n


def gen_topology(n_nodes: int, deg_min: int, deg_max: int, seed: int) -> Topology:
    """Random connected graph with target degrees uniform in [deg_min, deg_max].

    Stub matching plus connectivity and minimum-degree repair; the same
    seed always yields the same adjacency.
    """
    if n_nodes < 2:
        raise InfeasibleDegreeSequence("need at least 2 nodes")
    if not 1 <= deg_min <= deg_max < n_nodes:
        raise InfeasibleDegreeSequence(
            f"need 1 <= deg_min <= deg_max < n_nodes, got [{deg_min}, {deg_max}]"
        )
    rng = random.Random(seed)
    targets = [rng.randint(deg_min, deg_max) for _ in range(n_nodes)]
    if sum(targets) % 2:
        bump = next((i for i, t in enumerate(targets) if t < deg_max), None)
        if bump is not None:
            targets[bump] += 1
        else:
            targets[0] -= 1

    neighbors: list[set[int]] = [set() for _ in range(n_nodes)]

    def can_link(u: int, v: int) -> bool:
        return u != v and v not in neighbors[u]

    def link(u: int, v: int) -> None:
        neighbors[u].add(v)
        neighbors[v].add(u)

    # stub matching with a few retry passes for leftover stubs
    stubs = [i for i, t in enumerate(targets) for _ in range(t)]
    for _ in range(8):
        rng.shuffle(stubs)
        leftover = []
        for i in range(0, len(stubs) - 1, 2):
            u, v = stubs[i], stubs[i + 1]
            if can_link(u, v):
                link(u, v)
            else:
                leftover.extend((u, v))
        if len(stubs) % 2:
            leftover.append(stubs[-1])
        if len(leftover) <= 1 or len(leftover) == len(stubs):
            break
        stubs = leftover

    _connect_components(neighbors, targets, rng)
    _raise_min_degrees(neighbors, targets, deg_min, deg_max, rng)

    adj = [sorted(s) for s in neighbors]
    topo = Topology(n=n_nodes, adj=adj, seed=seed)
    assert topo.is_connected()
    return topo


def _components(neighbors: list[set[int]]) -> list[list[int]]:
    n = len(neighbors)
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        queue = [start]
        while queue:
            v = queue.pop()
            for w in neighbors[v]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        comps.append(comp)
    return comps


def _connect_components(neighbors, targets, rng) -> None:
    comps = _components(neighbors)
    while len(comps) > 1:
        # bridge the two smallest components through their least-loaded nodes
        comps.sort(key=len)
        a, b = comps[0], comps[1]
        u = min(a, key=lambda v: (len(neighbors[v]) - targets[v], v))
        v = min(b, key=lambda w: (len(neighbors[w]) - targets[w], w))
        neighbors[u].add(v)
        neighbors[v].add(u)
        comps = [a + b] + comps[2:]


def _raise_min_degrees(neighbors, targets, deg_min, deg_max, rng) -> None:
    low = [v for v in range(len(neighbors)) if len(neighbors[v]) < deg_min]
    for v in low:
        while len(neighbors[v]) < deg_min:
            pool = [
                w
                for w in range(len(neighbors))
                if w != v and w not in neighbors[v] and len(neighbors[w]) < deg_max
            ]
            if not pool:
                pool = [w for w in range(len(neighbors)) if w != v and w not in neighbors[v]]
                if not pool:
                    break
            w = min(pool, key=lambda x: (len(neighbors[x]), x))
            neighbors[v].add(w)
            neighbors[w].add(v)


# ---------------------------------------------------------------------------
# synthetic corpora
# ---------------------------------------------------------------------------

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"


def _word(rng: random.Random, syllables: int) -> str:
    return "".join(
        rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(syllables)
    )


def synth_corpus(
    n_streams: int,
    n_attrs: int = 4,
    keywords_per_attr: int = 600,
    n_themes: int = 14,
    seed: int = 0,
    min_descriptors: int = 2,
    max_descriptors: Optional[int] = None,
    theme_fidelity: float = 0.9,
):
    """Deterministic synthetic corpus with themed keyword families.

    Keywords of one theme share a prefix (``theme-suffix``), giving the
    alphabetical tree prefix groups and the trigram-fallback embeddings
    a semantic-similarity structure, so all three policies have
    something to summarize.  Streams mostly draw values from a single
    theme, which the Region placement mode can exploit.
    """
    if max_descriptors is None:
        max_descriptors = n_attrs
    max_descriptors = min(max_descriptors, n_attrs)
    if not 1 <= min_descriptors <= max_descriptors:
        raise ValueError("need 1 <= min_descriptors <= max_descriptors <= n_attrs")
    rng = random.Random(seed)
    registry = AttributeRegistry(f"attr{i}" for i in range(n_attrs))

    themes = []
    seen = set()
    while len(themes) < n_themes:
        w = _word(rng, 3)
        if w not in seen:
            seen.add(w)
            themes.append(w)

    # pools[attr][theme] -> sorted keyword list
    per_theme = max(1, keywords_per_attr // n_themes)
    pools: list[list[list[str]]] = []
    for attr in range(n_attrs):
        attr_pools = []
        for theme in themes:
            kws = set()
            while len(kws) < per_theme:
                kws.add(f"{theme}-{_word(rng, rng.randint(1, 3))}")
            attr_pools.append(sorted(kws))
        pools.append(attr_pools)

    # cyclic shuffled decks guarantee full pool coverage once a deck has
    # been drawn through
    decks: dict[tuple[int, int], list[str]] = {}
    positions: dict[tuple[int, int], int] = {}

    def draw(attr: int, theme: int) -> str:
        key = (attr, theme)
        deck = decks.get(key)
        if deck is None or positions[key] >= len(deck):
            deck = list(pools[attr][theme])
            rng.shuffle(deck)
            decks[key] = deck
            positions[key] = 0
        value = deck[positions[key]]
        positions[key] += 1
        return value

    streams = []
    for i in range(n_streams):
        theme = rng.randrange(n_themes)
        k = rng.randint(min_descriptors, max_descriptors)
        attrs = sorted(rng.sample(range(n_attrs), k))
        values = {}
        for attr in attrs:
            t = theme if rng.random() < theme_fidelity else rng.randrange(n_themes)
            values[attr] = draw(attr, t)
        streams.append(StreamAnnotation(f"s{i:05d}", values))
    return registry, streams


# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------

RANDOM = "random"
REGION = "region"


@dataclass
class Placement:
    mode: str
    hosts: list[list[int]]  # stream index -> hosting nodes
    regions: list[list[int]] = field(default_factory=list)
    stream_cluster: list[int] = field(default_factory=list)


def place_streams(
    topo: Topology,
    streams: list[StreamAnnotation],
    mode: str = RANDOM,
    n_regions: int = 7,
    n_clusters: int = 14,
    embeddings: Optional[EmbeddingSet] = None,
    seed: int = 0,
    replication_max: int = 2,
    edge_degree_max: int = 4,
) -> Placement:
    """Assign hosting nodes to streams.

    Random mode draws hosts uniformly among edge-designated nodes
    (degree <= edge_degree_max, falling back to all nodes).  Region
    mode splits the BFS traversal order into contiguous regions,
    clusters streams by their mean descriptor embedding, and assigns
    clusters to regions round-robin; a stream's replicas stay inside
    its region.
    """
    rng = random.Random(seed)
    edge_nodes = [v for v in range(topo.n) if topo.degree(v) <= edge_degree_max]
    if not edge_nodes:
        edge_nodes = list(range(topo.n))

    if mode == RANDOM:
        hosts = [
            _pick_hosts(edge_nodes, rng, replication_max) for _ in streams
        ]
        return Placement(mode=mode, hosts=hosts)

    if mode != REGION:
        raise ValueError(f"unknown placement mode {mode!r}")
    if embeddings is None:
        raise MissingEmbedding("<region placement needs embeddings>")

    order = topo.bfs_order(0)
    n_regions = max(1, min(n_regions, topo.n))
    block = (len(order) + n_regions - 1) // n_regions
    regions = [order[i * block : (i + 1) * block] for i in range(n_regions)]
    regions = [r for r in regions if r]

    centers = np.stack(
        [_stream_vector(s, embeddings) for s in streams]
    )
    clusters = kmeans(centers, min(n_clusters, len(streams)), seed=seed)
    stream_cluster = [0] * len(streams)
    hosts: list[list[int]] = [[] for _ in streams]
    for cidx, members in enumerate(clusters):
        region = regions[cidx % len(regions)]
        region_edge = [v for v in region if topo.degree(v) <= edge_degree_max]
        pool = region_edge or region
        for sidx in members.tolist():
            stream_cluster[sidx] = cidx
            hosts[sidx] = _pick_hosts(pool, rng, replication_max)
    return Placement(
        mode=mode, hosts=hosts, regions=regions, stream_cluster=stream_cluster
    )


def _pick_hosts(pool: list[int], rng: random.Random, replication_max: int) -> list[int]:
    primary = rng.choice(pool)
    replicas = rng.randint(0, replication_max) if replication_max else 0
    chosen = {primary}
    candidates = [v for v in pool if v != primary]
    if replicas and candidates:
        chosen.update(rng.sample(candidates, min(replicas, len(candidates))))
    return sorted(chosen)


def _stream_vector(stream: StreamAnnotation, emb: EmbeddingSet) -> np.ndarray:
    vecs = [emb.get(v) for _attr, v in sorted(stream.values.items())]
    return np.mean(vecs, axis=0)


# ---------------------------------------------------------------------------
# workload
# ---------------------------------------------------------------------------


def gen_workload(
    streams: list[StreamAnnotation],
    n_nodes: int,
    n_queries: int,
    alpha: float,
    seed: int,
    hop_bound: Optional[int] = None,
) -> list[Query]:
    """Queries built from real streams: pick a stream uniformly, keep a
    uniform nonempty subset of its descriptors, issue from a uniform
    node."""
    rng = random.Random(seed)
    queries = []
    for _ in range(n_queries):
        stream = streams[rng.randrange(len(streams))]
        attrs = sorted(stream.values)
        k = rng.randint(1, len(attrs))
        chosen = sorted(rng.sample(attrs, k))
        values = {attr: stream.values[attr] for attr in chosen}
        queries.append(
            Query(values=values, alpha=alpha, src=rng.randrange(n_nodes), hop_bound=hop_bound)
        )
    return queries
