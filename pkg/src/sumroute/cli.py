"""Command-line front end.

Data goes to files; progress goes to stderr, so outputs stay pipe-safe
and byte-identical across repeated runs with the same seed.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from . import sweep as sweep_mod
from .annotation import dump_corpus, load_corpus
from .config import ExperimentConfig, load_config
from .embedding import dump_embeddings, fallback_embeddings, load_embeddings
from .errors import ConfigInvalid, SumrouteError
from .simnet import Simulation, build_trees, run_experiment
from .sumtree import (
    build_alph,
    build_hash,
    build_meaning,
    deserialize_tree,
    minimal_depth,
    serialize_tree,
)
from .world import gen_workload, synth_corpus


def _progress(message: str) -> None:
    click.echo(message, err=True)


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Summarization-based discovery routing: trees, runs, sweeps."""


@main.command("build-tree")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--attr", "attr_name", required=True, help="attribute name")
@click.option(
    "--policy", required=True, type=click.Choice(["alph", "hash", "meaning"])
)
@click.option("--out", required=True, type=click.Path())
@click.option("-c", "c_bits", default=2, show_default=True, help="bits per level")
@click.option("--depth", default=None, type=int, help="hash depth d (default: minimal)")
@click.option("--extra-levels", default=2, show_default=True)
@click.option("--n-char", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--embeddings", "emb_path", default=None, type=click.Path(exists=True))
def cmd_build_tree(corpus, attr_name, policy, out, c_bits, depth, extra_levels,
                   n_char, seed, emb_path):
    """Build and serialize one attribute's summarization tree."""
    try:
        registry, streams = load_corpus(corpus)
        if attr_name.strip().lower() not in registry:
            _fail(f"attribute {attr_name!r} not in corpus "
                  f"(have: {', '.join(registry.names)})")
        attr = registry.id_of(attr_name)
        keywords = sorted({s.values[attr] for s in streams if attr in s.values})
        if policy == "alph":
            tree = build_alph(keywords, n_char=n_char)
        elif policy == "hash":
            d = depth if depth is not None else minimal_depth(len(keywords), c_bits)
            tree = build_hash(keywords, c_bits, d, extra_levels=extra_levels, seed=seed)
        else:
            emb = load_embeddings(emb_path) if emb_path else fallback_embeddings(
                keywords, seed=seed
            )
            tree = build_meaning(keywords, emb, c_bits, seed=seed)
    except SumrouteError as exc:
        _fail(str(exc))
    except ValueError as exc:
        _fail(str(exc))
    Path(out).write_bytes(serialize_tree(tree))
    code_len = (
        f"{tree.c * tree.d + 1} bits"
        if policy == "hash"
        else ("variable bits" if policy == "meaning" else "string")
    )
    click.echo(f"keywords: {tree.n_keywords}")
    click.echo(f"depth: {tree.depth}")
    click.echo(f"code length: {code_len}")
    click.echo(f"nodes: {tree.n_nodes}")


def _load_world(config_path, corpus, embeddings, seed_override) -> tuple:
    try:
        cfg = load_config(config_path)
    except ConfigInvalid as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if seed_override is not None:
        cfg.seed = seed_override
    corpus_path = corpus or cfg.corpus
    if corpus_path is None:
        click.echo("error: invalid config field 'corpus': no corpus given "
                   "(set the corpus key or pass --corpus)", err=True)
        sys.exit(2)
    registry, streams = load_corpus(corpus_path)
    emb_path = embeddings or cfg.embeddings
    emb = load_embeddings(emb_path) if emb_path else None
    return cfg, registry, streams, emb


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", default=None, type=click.Path(exists=True))
@click.option("--embeddings", default=None, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int, help="override the config seed")
@click.option("--out", default=".", type=click.Path(), show_default=True)
def cmd_run(config_path, corpus, embeddings, seed, out):
    """Run one experiment; write metrics.json and metrics.csv."""
    cfg, registry, streams, emb = _load_world(config_path, corpus, embeddings, seed)
    _progress(f"running: policy={cfg.policy.name} nodes={cfg.network.nodes} "
              f"seed={cfg.seed}")
    try:
        result = run_experiment(cfg, registry, streams, embeddings=emb)
    except ConfigInvalid as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.json").write_text(
        sweep_mod.metrics_json(cfg, result.metrics), encoding="utf-8"
    )
    (out_dir / "metrics.csv").write_text(
        sweep_mod.metrics_csv(cfg, result.metrics), encoding="utf-8"
    )
    _progress(f"wrote {out_dir / 'metrics.json'} and {out_dir / 'metrics.csv'}")


@main.command("sweep")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", default=None, type=click.Path(exists=True))
@click.option("--embeddings", default=None, type=click.Path(exists=True))
@click.option("--out", default=".", type=click.Path(), show_default=True)
def cmd_sweep(plan_path, corpus, embeddings, out):
    """Run a sweep plan; write runs.csv and aggregate.csv."""
    try:
        plan = sweep_mod.load_plan(plan_path)
    except ConfigInvalid as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    corpus_path = corpus or plan.base.get("corpus")
    if corpus_path is None:
        click.echo("error: invalid config field 'corpus': no corpus given", err=True)
        sys.exit(2)
    registry, streams = load_corpus(corpus_path)
    emb_path = embeddings or plan.base.get("embeddings")
    emb = load_embeddings(emb_path) if emb_path else None
    points = plan.points()
    _progress(f"sweep: {len(points)} config points")
    rows = sweep_mod.run_sweep(plan, registry, streams, embeddings=emb)
    failures = [r for r in rows if r.error]
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "runs.csv").write_text(sweep_mod.rows_csv(rows), encoding="utf-8")
    (out_dir / "aggregate.csv").write_text(
        sweep_mod.aggregate_csv(rows), encoding="utf-8"
    )
    _progress(
        f"wrote {out_dir / 'runs.csv'} and {out_dir / 'aggregate.csv'} "
        f"({len(failures)} failed points)"
    )


@main.command("dump-rt")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", default=None, type=click.Path(exists=True))
@click.option("--embeddings", default=None, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int)
@click.option("--node", "node_id", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
def cmd_dump_rt(config_path, corpus, embeddings, seed, node_id, out):
    """Run the advertisement phase and dump one node's routing table."""
    cfg, registry, streams, emb = _load_world(config_path, corpus, embeddings, seed)
    sim = Simulation(cfg, registry, streams, embeddings=emb)
    if not 0 <= node_id < sim.topology.n:
        _fail(f"node {node_id} outside 0..{sim.topology.n - 1}")
    sim.run_advertisement()
    Path(out).write_text(sim.nodes[node_id].table.dump(), encoding="utf-8")
    _progress(f"wrote routing table of node {node_id} to {out}")


@main.command("gen-corpus")
@click.option("--streams", "n_streams", required=True, type=int)
@click.option("--attrs", default=4, show_default=True)
@click.option("--keywords-per-attr", default=600, show_default=True)
@click.option("--themes", default=14, show_default=True)
@click.option("--min-descriptors", default=2, show_default=True)
@click.option("--max-descriptors", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--embeddings-out", default=None, type=click.Path())
def cmd_gen_corpus(n_streams, attrs, keywords_per_attr, themes, min_descriptors,
                   max_descriptors, seed, out, embeddings_out):
    """Generate a deterministic synthetic corpus (and embeddings)."""
    registry, streams = synth_corpus(
        n_streams,
        n_attrs=attrs,
        keywords_per_attr=keywords_per_attr,
        n_themes=themes,
        seed=seed,
        min_descriptors=min_descriptors,
        max_descriptors=max_descriptors,
    )
    Path(out).write_text(dump_corpus(registry, streams), encoding="utf-8")
    _progress(f"wrote {n_streams} streams to {out}")
    if embeddings_out:
        keywords = {v for s in streams for v in s.values.values()}
        emb = fallback_embeddings(keywords, seed=seed)
        Path(embeddings_out).write_text(dump_embeddings(emb), encoding="utf-8")
        _progress(f"wrote {len(keywords)} embeddings to {embeddings_out}")


if __name__ == "__main__":
    main()
