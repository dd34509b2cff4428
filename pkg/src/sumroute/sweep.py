"""Parameter sweeps: enumerate config points, run them, emit CSV.

A plan is a base config plus value lists for {nodes, cov, c, policy}
and optionally seeds.  Every point also gets a matching
no-summarization companion run on the same world, which supplies the
compression-ratio column (rt_size(nSum) / rt_size(policy)).
"""

from __future__ import annotations

import copy
import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .annotation import AttributeRegistry, StreamAnnotation
from .config import ExperimentConfig, config_from_dict
from .embedding import EmbeddingSet
from .errors import ConfigInvalid
from .simnet import Metrics, RunResult, run_experiment
from .sumtree import SumTree

SWEEP_KEYS = ("nodes", "cov", "c", "policy")

METRIC_COLUMNS = list(Metrics.FIELDS) + ["compression_ratio"]


@dataclass
class ExperimentPlan:
    base: dict
    nodes: list[int] = field(default_factory=list)
    cov: list[float] = field(default_factory=list)
    c: list[int] = field(default_factory=list)
    policy: list[str] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)

    def points(self) -> list[ExperimentConfig]:
        """Cartesian product of the sweep lists, deterministic order."""
        base = self.base
        policies = self.policy or [base.get("policy", {}).get("name", "none")]
        nodes_list = self.nodes or [base.get("network", {}).get("nodes")]
        covs = self.cov or [base.get("policy", {}).get("cov", 1.0)]
        cs = self.c or [base.get("policy", {}).get("c", 2)]
        seeds = self.seeds or [base.get("seed", 0)]
        out = []
        for policy in policies:
            for nodes in nodes_list:
                for cov in covs:
                    for c in cs:
                        for seed in seeds:
                            data = copy.deepcopy(base)
                            data.setdefault("network", {})["nodes"] = nodes
                            pol = data.setdefault("policy", {})
                            pol["name"] = policy
                            pol["cov"] = cov
                            pol["c"] = c
                            data["seed"] = seed
                            out.append(config_from_dict(data))
        return out


def load_plan(path) -> ExperimentPlan:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return plan_from_dict(data)


def plan_from_dict(data: dict) -> ExperimentPlan:
    if "base" not in data or not isinstance(data["base"], dict):
        raise ConfigInvalid("base", "plan needs a base config mapping")
    sweep = data.get("sweep", {}) or {}
    if not isinstance(sweep, dict):
        raise ConfigInvalid("sweep", "expected a mapping of value lists")
    for key in sweep:
        if key not in SWEEP_KEYS + ("seeds",):
            raise ConfigInvalid(f"sweep.{key}", "unknown sweep dimension")

    def as_list(key):
        value = sweep.get(key, [])
        if value is None:
            return []
        if not isinstance(value, list):
            raise ConfigInvalid(f"sweep.{key}", "expected a list")
        return value

    config_from_dict(copy.deepcopy(data["base"]))  # validate base eagerly
    return ExperimentPlan(
        base=data["base"],
        nodes=as_list("nodes"),
        cov=as_list("cov"),
        c=as_list("c"),
        policy=as_list("policy"),
        seeds=as_list("seeds"),
    )


@dataclass
class SweepRow:
    config: ExperimentConfig
    metrics: Optional[Metrics]
    compression_ratio: Optional[float]
    error: str = ""

    def flat(self) -> dict:
        row = dict(self.config.flat())
        if self.metrics is not None:
            row.update(self.metrics.to_dict())
            row["compression_ratio"] = (
                round(self.compression_ratio, 6)
                if self.compression_ratio is not None
                else ""
            )
        else:
            for name in METRIC_COLUMNS:
                row[name] = ""
        row["error"] = self.error
        return row


def run_sweep(
    plan: ExperimentPlan,
    registry: AttributeRegistry,
    streams: list[StreamAnnotation],
    embeddings: Optional[EmbeddingSet] = None,
) -> list[SweepRow]:
    """Run every plan point; failures are recorded per row."""
    rows: list[SweepRow] = []
    tree_cache: dict[tuple, dict[int, SumTree]] = {}
    nsum_cache: dict[tuple, float] = {}
    for cfg in plan.points():
        try:
            result = _run_point(cfg, registry, streams, embeddings, tree_cache)
            ratio = _compression_ratio(
                cfg, result, registry, streams, embeddings, nsum_cache
            )
            rows.append(SweepRow(cfg, result.metrics, ratio))
        except Exception as exc:  # keep sweeping on per-point failure
            rows.append(SweepRow(cfg, None, None, error=f"{type(exc).__name__}: {exc}"))
    return rows


def _run_point(cfg, registry, streams, embeddings, tree_cache) -> RunResult:
    trees = None
    if cfg.policy.name != "none":
        key = (
            cfg.policy.name,
            cfg.policy.c,
            cfg.policy.d,
            cfg.policy.extra_levels,
            cfg.policy.n_char,
            cfg.seed,
        )
        trees = tree_cache.get(key)
        if trees is None:
            from .simnet import build_trees

            trees = build_trees(
                cfg.policy.name,
                streams,
                cfg.policy.c,
                cfg.policy.d,
                cfg.policy.extra_levels,
                cfg.policy.n_char,
                cfg.seed,
                embeddings,
            )
            tree_cache[key] = trees
    return run_experiment(cfg, registry, streams, embeddings=embeddings, trees=trees)


def _compression_ratio(
    cfg, result, registry, streams, embeddings, nsum_cache
) -> Optional[float]:
    if cfg.policy.name == "none":
        return 1.0
    key = (
        cfg.network.nodes,
        cfg.network.deg_min,
        cfg.network.deg_max,
        cfg.placement.mode,
        cfg.placement.regions,
        cfg.placement.clusters,
        cfg.placement.replication,
        cfg.placement.edge_degree_max,
        cfg.bounds.b_ad,
        cfg.seed,
    )
    nsum_rt = nsum_cache.get(key)
    if nsum_rt is None:
        nsum_cfg = copy.deepcopy(cfg)
        nsum_cfg.policy.name = "none"
        nsum_cfg.workload.queries = 0
        nsum_res = run_experiment(nsum_cfg, registry, streams, embeddings=embeddings)
        nsum_rt = nsum_res.metrics.rt_size
        nsum_cache[key] = nsum_rt
    if result.metrics.rt_size <= 0:
        return None
    return nsum_rt / result.metrics.rt_size


# ---------------------------------------------------------------------------
# output formatting
# ---------------------------------------------------------------------------


def _csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def rows_csv(rows: list[SweepRow]) -> str:
    if not rows:
        return ""
    flat = [r.flat() for r in rows]
    columns = list(flat[0].keys())
    return _csv_text(flat, columns)


def aggregate_csv(rows: list[SweepRow]) -> str:
    """Mean metrics per sweep point (seeds averaged)."""
    groups: dict[tuple, list[SweepRow]] = {}
    for row in rows:
        if row.metrics is None:
            continue
        cfg = row.config
        key = (
            cfg.policy.name,
            cfg.network.nodes,
            cfg.policy.cov,
            cfg.policy.c,
            cfg.policy.coverage_source,
            cfg.placement.mode,
        )
        groups.setdefault(key, []).append(row)
    out_rows = []
    for key in sorted(groups, key=str):
        members = groups[key]
        agg = {
            "policy.name": key[0],
            "network.nodes": key[1],
            "policy.cov": key[2],
            "policy.c": key[3],
            "policy.coverage_source": key[4],
            "placement.mode": key[5],
            "runs": len(members),
        }
        for name in Metrics.FIELDS:
            agg[name] = round(
                sum(getattr(r.metrics, name) for r in members) / len(members), 6
            )
        ratios = [r.compression_ratio for r in members if r.compression_ratio]
        agg["compression_ratio"] = (
            round(sum(ratios) / len(ratios), 6) if ratios else ""
        )
        out_rows.append(agg)
    if not out_rows:
        return ""
    return _csv_text(out_rows, list(out_rows[0].keys()))


def metrics_json(cfg: ExperimentConfig, metrics: Metrics) -> str:
    payload = {"config": cfg.flat(), "metrics": metrics.to_dict()}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def metrics_csv(cfg: ExperimentConfig, metrics: Metrics, ratio: Optional[float] = None) -> str:
    row = dict(cfg.flat())
    row.update(metrics.to_dict())
    row["compression_ratio"] = round(ratio, 6) if ratio is not None else ""
    return _csv_text([row], list(row.keys()))
