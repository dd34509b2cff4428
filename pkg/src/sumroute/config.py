"""Experiment configuration: dataclasses, YAML loading, validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .errors import ConfigInvalid

POLICY_NAMES = ("none", "nsum", "alph", "hash", "meaning")


@dataclass
class NetworkConfig:
    nodes: int
    deg_min: int = 2
    deg_max: int = 10


@dataclass
class PolicyConfig:
    name: str = "none"
    c: int = 2
    d: Optional[int] = None  # None: minimal depth per attribute
    extra_levels: int = 2
    n_char: int = 64
    cov: float = 1.0
    coverage_source: str = "scv"


@dataclass
class PlacementConfig:
    mode: str = "random"
    regions: int = 7
    clusters: int = 14
    replication: int = 2
    edge_degree_max: int = 4


@dataclass
class WorkloadConfig:
    queries: int
    alpha: float = 1.0


@dataclass
class BoundsConfig:
    b_ad: Optional[int] = None  # None = unbounded
    b_q: Optional[int] = None


@dataclass
class BaselineConfig:
    lru_max_entries: Optional[int] = None
    flood_on_miss: Optional[bool] = None  # None: on iff LRU-bounded


@dataclass
class ExperimentConfig:
    network: NetworkConfig
    policy: PolicyConfig
    workload: WorkloadConfig
    seed: int
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    corpus: Optional[str] = None
    embeddings: Optional[str] = None

    @property
    def flood_on_miss(self) -> bool:
        if self.baseline.flood_on_miss is not None:
            return self.baseline.flood_on_miss
        return self.baseline.lru_max_entries is not None

    def flat(self) -> dict[str, Any]:
        """Stable flat key -> value view for CSV columns."""
        return {
            "seed": self.seed,
            "network.nodes": self.network.nodes,
            "network.deg_min": self.network.deg_min,
            "network.deg_max": self.network.deg_max,
            "policy.name": self.policy.name,
            "policy.c": self.policy.c,
            "policy.d": self.policy.d if self.policy.d is not None else "",
            "policy.extra_levels": self.policy.extra_levels,
            "policy.n_char": self.policy.n_char,
            "policy.cov": self.policy.cov,
            "policy.coverage_source": self.policy.coverage_source,
            "placement.mode": self.placement.mode,
            "placement.regions": self.placement.regions,
            "placement.clusters": self.placement.clusters,
            "placement.replication": self.placement.replication,
            "placement.edge_degree_max": self.placement.edge_degree_max,
            "workload.queries": self.workload.queries,
            "workload.alpha": self.workload.alpha,
            "bounds.b_ad": self.bounds.b_ad if self.bounds.b_ad is not None else "",
            "bounds.b_q": self.bounds.b_q if self.bounds.b_q is not None else "",
            "baseline.lru_max_entries": (
                self.baseline.lru_max_entries
                if self.baseline.lru_max_entries is not None
                else ""
            ),
            "baseline.flood_on_miss": int(self.flood_on_miss),
        }


def _require(data: dict, key: str, parent: str = "") -> Any:
    path = f"{parent}.{key}" if parent else key
    if not isinstance(data, dict) or key not in data:
        raise ConfigInvalid(path, "missing required key")
    return data[key]


def _get_int(data: dict, key: str, parent: str, default=None, required=False,
             minimum=None, allow_none=False):
    path = f"{parent}.{key}" if parent else key
    if key not in data:
        if required:
            raise ConfigInvalid(path, "missing required key")
        return default
    value = data[key]
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(path, f"expected integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigInvalid(path, f"must be >= {minimum}, got {value}")
    return value


def _get_float(data: dict, key: str, parent: str, default=None, lo=None, hi=None):
    path = f"{parent}.{key}" if parent else key
    if key not in data:
        return default
    value = data[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigInvalid(path, f"expected number, got {value!r}")
    value = float(value)
    if lo is not None and value < lo or hi is not None and value > hi:
        raise ConfigInvalid(path, f"must be in [{lo}, {hi}], got {value}")
    return value


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("<root>", "config must be a mapping")

    seed = _get_int(data, "seed", "", required=True)

    net = _require(data, "network")
    network = NetworkConfig(
        nodes=_get_int(net, "nodes", "network", required=True, minimum=2),
        deg_min=_get_int(net, "deg_min", "network", default=2, minimum=1),
        deg_max=_get_int(net, "deg_max", "network", default=10, minimum=1),
    )
    if network.deg_min > network.deg_max:
        raise ConfigInvalid("network.deg_min", "deg_min exceeds deg_max")
    if network.deg_max >= network.nodes:
        raise ConfigInvalid("network.deg_max", "deg_max must be < nodes")

    pol = _require(data, "policy")
    name = _require(pol, "name", "policy")
    if name not in POLICY_NAMES:
        raise ConfigInvalid("policy.name", f"unknown policy {name!r}")
    if name == "nsum":
        name = "none"
    coverage_source = pol.get("coverage_source", "scv")
    if coverage_source not in ("scv", "estimator"):
        raise ConfigInvalid(
            "policy.coverage_source", f"expected scv|estimator, got {coverage_source!r}"
        )
    policy = PolicyConfig(
        name=name,
        c=_get_int(pol, "c", "policy", default=2, minimum=1),
        d=_get_int(pol, "d", "policy", default=None, minimum=1, allow_none=True),
        extra_levels=_get_int(pol, "extra_levels", "policy", default=2, minimum=0),
        n_char=_get_int(pol, "n_char", "policy", default=64, minimum=2),
        cov=_get_float(pol, "cov", "policy", default=1.0, lo=0.0, hi=1.0),
        coverage_source=coverage_source,
    )

    wl = _require(data, "workload")
    workload = WorkloadConfig(
        queries=_get_int(wl, "queries", "workload", required=True, minimum=0),
        alpha=_get_float(wl, "alpha", "workload", default=1.0, lo=0.0, hi=1.0),
    )

    pl = data.get("placement", {})
    mode = pl.get("mode", "random")
    if mode not in ("random", "region"):
        raise ConfigInvalid("placement.mode", f"expected random|region, got {mode!r}")
    placement = PlacementConfig(
        mode=mode,
        regions=_get_int(pl, "regions", "placement", default=7, minimum=1),
        clusters=_get_int(pl, "clusters", "placement", default=14, minimum=1),
        replication=_get_int(pl, "replication", "placement", default=2, minimum=0),
        edge_degree_max=_get_int(pl, "edge_degree_max", "placement", default=4, minimum=0),
    )

    bd = data.get("bounds", {})
    bounds = BoundsConfig(
        b_ad=_get_int(bd, "b_ad", "bounds", default=None, minimum=0, allow_none=True),
        b_q=_get_int(bd, "b_q", "bounds", default=None, minimum=0, allow_none=True),
    )

    baseline = _parse_baseline(data.get("baseline"))

    corpus = data.get("corpus")
    if corpus is not None and not isinstance(corpus, str):
        raise ConfigInvalid("corpus", "expected a path string")
    embeddings = data.get("embeddings")
    if embeddings is not None and not isinstance(embeddings, str):
        raise ConfigInvalid("embeddings", "expected a path string")

    return ExperimentConfig(
        network=network,
        policy=policy,
        workload=workload,
        seed=seed,
        placement=placement,
        bounds=bounds,
        baseline=baseline,
        corpus=corpus,
        embeddings=embeddings,
    )


def _parse_baseline(raw) -> BaselineConfig:
    if raw is None:
        return BaselineConfig()
    if isinstance(raw, str):
        if raw == "nsum":
            return BaselineConfig()
        if raw.startswith("lru:"):
            try:
                bound = int(raw.split(":", 1)[1])
            except ValueError:
                raise ConfigInvalid("baseline", f"bad lru bound in {raw!r}")
            if bound < 0:
                raise ConfigInvalid("baseline", "lru bound must be >= 0")
            return BaselineConfig(lru_max_entries=bound)
        raise ConfigInvalid("baseline", f"expected nsum|lru:<n>, got {raw!r}")
    if isinstance(raw, dict):
        bound = _get_int(
            raw, "lru_max_entries", "baseline", default=None, minimum=0, allow_none=True
        )
        flood = raw.get("flood_on_miss")
        if flood is not None and not isinstance(flood, bool):
            raise ConfigInvalid("baseline.flood_on_miss", "expected boolean")
        return BaselineConfig(lru_max_entries=bound, flood_on_miss=flood)
    raise ConfigInvalid("baseline", f"expected string or mapping, got {raw!r}")


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data or {})
