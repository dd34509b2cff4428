"""Deterministic discrete-round simulator for advertisement and query
forwarding over a generated topology.

Phase 1 floods every host's coded descriptors (AdvP) until no message
is in flight; phase 2 issues the query workload (QFP) and aggregates
routing-table size, traffic, latency, misled-message, and recall
metrics.  Messages sent in round r arrive in round r + 1; identical
configs and seeds replay bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .annotation import AttributeRegistry, Query, StreamAnnotation, keywords_by_attr
from .config import ExperimentConfig
from .embedding import EmbeddingSet, fallback_embeddings
from .errors import ConfigInvalid
from .estimator import HashEstimatorParams
from .routing import (
    AdvMsg,
    CodeSpace,
    NodeState,
    QueryMsg,
    RoutingTable,
    SummarizationConfig,
    handle_adv,
    handle_query,
)
from .sumtree import SumTree, build_alph, build_hash, build_meaning, minimal_depth
from .world import Placement, Topology, gen_topology, gen_workload, place_streams


@dataclass
class Metrics:
    rt_size: float
    traffic: float
    latency: float
    misled_pct: float
    recall: float
    adv_messages: int
    query_messages: int
    response_messages: int
    answered_queries: int
    n_queries: int
    adv_rounds: int

    FIELDS = (
        "rt_size",
        "traffic",
        "latency",
        "misled_pct",
        "recall",
        "adv_messages",
        "query_messages",
        "response_messages",
        "answered_queries",
        "n_queries",
        "adv_rounds",
    )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass
class RunResult:
    metrics: Metrics
    table_sizes: list[int] = field(default_factory=list)
    per_query_found: list[set] = field(default_factory=list)
    per_query_true: list[set] = field(default_factory=list)


def build_trees(
    policy: str,
    streams: list[StreamAnnotation],
    c: int,
    d: Optional[int],
    extra_levels: int,
    n_char: int,
    seed: int,
    embeddings: Optional[EmbeddingSet] = None,
) -> dict[int, SumTree]:
    """One summarization tree per attribute over the corpus keyword sets."""
    by_attr = keywords_by_attr(streams)
    trees: dict[int, SumTree] = {}
    for attr in sorted(by_attr):
        kws = sorted(by_attr[attr])
        if policy == "alph":
            trees[attr] = build_alph(kws, n_char=n_char)
        elif policy == "hash":
            depth = d if d is not None else minimal_depth(len(kws), c)
            trees[attr] = build_hash(kws, c, depth, extra_levels=extra_levels, seed=seed)
        elif policy == "meaning":
            if embeddings is None:
                embeddings = fallback_embeddings(
                    {kw for s in by_attr.values() for kw in s}, seed=seed
                )
            trees[attr] = build_meaning(kws, embeddings, c, seed=seed)
        else:
            raise ValueError(f"no trees for policy {policy!r}")
    return trees


class Simulation:
    """One fully-built world, ready to run the two protocol phases."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        registry: AttributeRegistry,
        streams: list[StreamAnnotation],
        embeddings: Optional[EmbeddingSet] = None,
        placement: Optional[Placement] = None,
        trees: Optional[dict[int, SumTree]] = None,
        topology: Optional[Topology] = None,
    ):
        if not streams:
            raise ConfigInvalid("corpus", "no streams to simulate")
        self.cfg = cfg
        self.registry = registry
        self.streams = streams
        self.n_attrs = registry.n
        policy = cfg.policy.name

        self.topology = topology if topology is not None else gen_topology(
            cfg.network.nodes, cfg.network.deg_min, cfg.network.deg_max, cfg.seed
        )

        if embeddings is None and (policy == "meaning" or cfg.placement.mode == "region"):
            embeddings = fallback_embeddings(
                {v for s in streams for v in s.values.values()}, seed=cfg.seed
            )
        self.embeddings = embeddings

        if trees is None and policy != "none":
            trees = build_trees(
                policy,
                streams,
                cfg.policy.c,
                cfg.policy.d,
                cfg.policy.extra_levels,
                cfg.policy.n_char,
                cfg.seed,
                embeddings,
            )
        self.trees = trees or {}

        est_params = {}
        if policy == "hash":
            for attr, tree in self.trees.items():
                est_params[attr] = HashEstimatorParams.for_corpus(
                    tree.n_keywords, tree.c, tree.d
                )
        self.space = CodeSpace(policy, self.trees, est_params)

        self.coded: list[dict[int, int]] = [
            self._encode_stream(s) for s in streams
        ]

        if placement is None:
            placement = place_streams(
                self.topology,
                streams,
                mode=cfg.placement.mode,
                n_regions=cfg.placement.regions,
                n_clusters=cfg.placement.clusters,
                embeddings=embeddings,
                seed=cfg.seed,
                replication_max=cfg.placement.replication,
                edge_degree_max=cfg.placement.edge_degree_max,
            )
        self.placement = placement

        rt_cfg = SummarizationConfig(
            policy=policy,
            cov=cfg.policy.cov,
            coverage_source=cfg.policy.coverage_source,
        )
        bound = cfg.baseline.lru_max_entries
        self.nodes = [
            NodeState(
                v,
                self.topology.adj[v],
                RoutingTable(self.space, rt_cfg, max_entries=bound),
            )
            for v in range(self.topology.n)
        ]
        for sidx, hosts in enumerate(placement.hosts):
            for v in hosts:
                self.nodes[v].streams.append(
                    (streams[sidx].stream_id, self.coded[sidx])
                )

        self.adv_messages = 0
        self.adv_rounds = 0
        self._truth = _TruthIndex(streams, self.n_attrs)

    def _encode_stream(self, stream: StreamAnnotation) -> dict[int, int]:
        coded = {}
        for attr, value in stream.values.items():
            if self.space.policy == "none":
                coded[attr] = self.space.intern(attr, value)
            else:
                code, _scv = self.trees[attr].encode(value)
                coded[attr] = self.space.intern(attr, code)
        return coded

    def encode_query(self, query: Query) -> dict[int, int]:
        coded = {}
        for attr, value in query.values.items():
            if self.space.policy == "none":
                coded[attr] = self.space.intern(attr, value)
            else:
                code, _scv = self.trees[attr].encode(value)
                coded[attr] = self.space.intern(attr, code)
        return coded

    # -- phase 1: advertisement --------------------------------------------

    def run_advertisement(self) -> int:
        b_ad = self.cfg.bounds.b_ad
        pending: list[tuple[int, AdvMsg]] = []
        hosting = sorted(
            {v for hosts in self.placement.hosts for v in hosts}
        )
        for v in hosting:
            state = self.nodes[v]
            seen: dict[tuple[int, int], None] = {}
            for _sid, coded in state.streams:
                for attr in sorted(coded):
                    seen.setdefault((attr, coded[attr]))
            descriptors = tuple(sorted(seen))
            if not descriptors:
                continue
            msg = AdvMsg(
                origin=v, sender=v, descriptors=descriptors, hops_remaining=b_ad
            )
            for nb in state.neighbors:
                pending.append((nb, msg))

        rounds = 0
        while pending:
            rounds += 1
            self.adv_messages += len(pending)
            nxt: list[tuple[int, AdvMsg]] = []
            for dest, msg in pending:
                nxt.extend(handle_adv(self.nodes[dest], msg))
            pending = nxt
        self.adv_rounds = rounds
        return rounds

    def table_sizes(self) -> list[int]:
        return [node.table.size for node in self.nodes]

    # -- phase 2: queries -----------------------------------------------------

    def run_queries(self, queries: list[Query]) -> RunResult:
        flood = self.cfg.flood_on_miss
        n_attrs = self.n_attrs
        query_messages = 0
        response_messages = 0
        misled = 0
        latencies: list[int] = []
        per_query_found: list[set] = []
        per_query_true: list[set] = []

        for qid, query in enumerate(queries):
            coded = self.encode_query(query)
            b_q = query.hop_bound
            found: set[str] = set()
            best_hops: Optional[int] = None

            # transmissions trace for misled accounting
            t_parent: list[int] = []
            t_resp: list[bool] = []

            src_state = self.nodes[query.src]
            local, targets = handle_query(
                src_state,
                QueryMsg(
                    qid=qid,
                    sender=None,
                    values=coded,
                    alpha=query.alpha,
                    hops_remaining=b_q,
                    path=(query.src,),
                ),
                n_attrs,
                flood_on_miss=flood,
            )
            if local:
                found.update(local)
                best_hops = 0
            pending: list[tuple[int, QueryMsg, int]] = []
            next_hops = None if b_q is None else b_q - 1
            for nb in targets:
                idx = len(t_parent)
                t_parent.append(-1)
                t_resp.append(False)
                pending.append(
                    (
                        nb,
                        QueryMsg(
                            qid=qid,
                            sender=query.src,
                            values=coded,
                            alpha=query.alpha,
                            hops_remaining=next_hops,
                            path=(query.src, nb),
                        ),
                        idx,
                    )
                )

            while pending:
                nxt: list[tuple[int, QueryMsg, int]] = []
                for dest, msg, idx in pending:
                    query_messages += 1
                    local, targets = handle_query(
                        self.nodes[dest], msg, n_attrs, flood_on_miss=flood
                    )
                    if local:
                        found.update(local)
                        hops = len(msg.path) - 1
                        response_messages += hops
                        if best_hops is None or hops > best_hops:
                            best_hops = hops
                        walk = idx
                        while walk != -1 and not t_resp[walk]:
                            t_resp[walk] = True
                            walk = t_parent[walk]
                    hops_left = (
                        None
                        if msg.hops_remaining is None
                        else msg.hops_remaining - 1
                    )
                    for nb in targets:
                        cidx = len(t_parent)
                        t_parent.append(idx)
                        t_resp.append(False)
                        nxt.append(
                            (
                                nb,
                                QueryMsg(
                                    qid=qid,
                                    sender=dest,
                                    values=coded,
                                    alpha=query.alpha,
                                    hops_remaining=hops_left,
                                    path=msg.path + (nb,),
                                ),
                                cidx,
                            )
                        )
                pending = nxt

            misled += sum(1 for r in t_resp if not r)
            if best_hops is not None:
                latencies.append(best_hops)
            per_query_found.append(found)
            per_query_true.append(self._truth.matching(query))

        n_q = len(queries)
        recalls = [
            len(found & true) / len(true) if true else 1.0
            for found, true in zip(per_query_found, per_query_true)
        ]
        sizes = self.table_sizes()
        metrics = Metrics(
            rt_size=float(np.mean(sizes)) if sizes else 0.0,
            traffic=(query_messages + response_messages) / n_q if n_q else 0.0,
            latency=float(np.mean(latencies)) if latencies else 0.0,
            misled_pct=100.0 * misled / query_messages if query_messages else 0.0,
            recall=float(np.mean(recalls)) if recalls else 1.0,
            adv_messages=self.adv_messages,
            query_messages=query_messages,
            response_messages=response_messages,
            answered_queries=len(latencies),
            n_queries=n_q,
            adv_rounds=self.adv_rounds,
        )
        return RunResult(
            metrics=metrics,
            table_sizes=sizes,
            per_query_found=per_query_found,
            per_query_true=per_query_true,
        )


class _TruthIndex:
    """Raw-keyword alpha-match ground truth over all streams."""

    def __init__(self, streams: list[StreamAnnotation], n_attrs: int):
        self.n_attrs = n_attrs
        self.stream_ids = [s.stream_id for s in streams]
        self._value_ids: dict[int, dict[str, int]] = {}
        self._columns: dict[int, np.ndarray] = {}
        n = len(streams)
        for attr in range(n_attrs):
            ids: dict[str, int] = {}
            col = np.full(n, -1, dtype=np.int32)
            for i, s in enumerate(streams):
                v = s.values.get(attr)
                if v is None:
                    continue
                vid = ids.setdefault(v, len(ids))
                col[i] = vid
            self._value_ids[attr] = ids
            self._columns[attr] = col

    def matching(self, query: Query) -> set[str]:
        n = self.n_attrs
        mism = np.zeros(len(self.stream_ids), dtype=np.int32)
        for attr, value in query.values.items():
            col = self._columns[attr]
            vid = self._value_ids[attr].get(value, -2)
            mism += (col != vid) & (col != -1)
        ok = (n - mism) >= query.alpha * n - 1e-9
        return {self.stream_ids[i] for i in np.nonzero(ok)[0]}


def run_experiment(
    cfg: ExperimentConfig,
    registry: AttributeRegistry,
    streams: list[StreamAnnotation],
    embeddings: Optional[EmbeddingSet] = None,
    trees: Optional[dict[int, SumTree]] = None,
) -> RunResult:
    """Build the world, run both phases, and aggregate metrics."""
    sim = Simulation(cfg, registry, streams, embeddings=embeddings, trees=trees)
    sim.run_advertisement()
    queries = gen_workload(
        streams,
        sim.topology.n,
        cfg.workload.queries,
        cfg.workload.alpha,
        cfg.seed,
        hop_bound=cfg.bounds.b_q,
    )
    return sim.run_queries(queries)
