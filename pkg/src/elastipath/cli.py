"""Batch command line interface.

Every subcommand reads a JSON run configuration (plus a few direct flags),
writes deterministic JSON documents and raw volumes, and exits nonzero
with a machine-readable error document on failure.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import runs
from .errors import ElastipathError
from .features import Image
from .fileio import (
    RunConfig,
    canonical_json,
    read_image,
    read_seeds,
    render_overlay,
    write_json,
    write_volume,
)
from .grid import GridSpec2, GridSpec3, LiftedPoint
from .solver import agsi_solve, fast_march, update_count_trend
from .tracer import path_energy, trace_geodesic


def _fail(exc: BaseException) -> None:
    doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    click.echo(canonical_json(doc), err=True, nl=False)
    sys.exit(2)


def _outdir(cfg: RunConfig) -> str:
    out = cfg.output.get("dir", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _load_config(config_path) -> RunConfig:
    return RunConfig.load(config_path)


@click.group()
def main():
    """Curvature-penalized minimal paths: solve, trace, detect, extract."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def features(config_path):
    """Compute oriented responses and the speed field for an image."""
    try:
        cfg = _load_config(config_path)
        img = read_image(cfg.image)
        bundle = runs.build_features(cfg, img)
        out = _outdir(cfg)
        write_volume(os.path.join(out, "response"), bundle.response.samples
                     if hasattr(bundle, "response") else bundle.flux.response.samples,
                     bundle.grid)
        write_volume(os.path.join(out, "speed"), bundle.speed.phi, bundle.grid)
        click.echo(canonical_json({"ok": True, "out": out}), nl=False)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        _fail(exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True),
              help="JSON list of lifted points [[x, y, theta], ...]")
@click.option("--oracle", is_flag=True, help="solve with the fixed-point oracle instead")
def solve(config_path, sources_path, oracle):
    """Solve the geodesic distance map from the given sources."""
    try:
        cfg = _load_config(config_path)
        img = read_image(cfg.image) if cfg.image else None
        metric = runs.build_metric(cfg, img)
        from .fileio import read_json
        pts = read_json(sources_path)
        sources = [LiftedPoint(*p) if len(p) == 3 else (p[0], p[1]) for p in pts]
        policy = runs.stencil_policy(cfg)
        if oracle:
            amap = agsi_solve(metric, sources, policy=policy)
            stats = amap.stats
        else:
            amap, stats = fast_march(metric, sources, policy=policy)
        out = _outdir(cfg)
        write_volume(os.path.join(out, "action_map"), amap.values, amap.grid)
        write_json(os.path.join(out, "solve_stats.json"), stats.as_dict() | {
            "solver": "agsi" if oracle else "fast_march"})
        click.echo(canonical_json({"ok": True, "out": out,
                                   "stats": stats.as_dict()}), nl=False)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--source", nargs=3, type=float, required=True)
@click.option("--target", nargs=3, type=float, required=True)
def trace(config_path, source, target):
    """Solve toward one target and back-track the geodesic."""
    try:
        cfg = _load_config(config_path)
        img = read_image(cfg.image) if cfg.image else None
        metric = runs.build_metric(cfg, img)
        policy = runs.stencil_policy(cfg)
        src = LiftedPoint(*source)
        tgt = LiftedPoint(*target)
        amap, _ = fast_march(metric, [src], stops=[tgt], policy=policy)
        path = trace_geodesic(amap, metric, tgt, policy=policy)
        energy = path_energy(path, metric).value
        out = _outdir(cfg)
        from .fileio import path_document
        doc = path_document(path, energy, meta={
            "source": list(source), "target": list(target)})
        write_json(os.path.join(out, "path.json"), doc)
        click.echo(canonical_json(doc), nl=False)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


def _run_app(config_path, mode):
    cfg = _load_config(config_path)
    cfg.application["mode"] = mode
    img = read_image(cfg.image)
    seed_doc = read_seeds(cfg.application["seeds"])
    doc = runs.run_application(cfg, img, seed_doc)
    out = _outdir(cfg)
    write_json(os.path.join(out, f"{mode}_result.json"), doc)
    seeds = [(p["x"], p["y"], p.get("theta")) for p in seed_doc["points"]]
    render_overlay(img, runs.document_paths(doc), seeds,
                   out_path=os.path.join(out, f"{mode}_overlay.png"))
    click.echo(canonical_json(doc), nl=False)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def contour(config_path):
    """Detect a closed contour through the configured seed points."""
    try:
        _run_app(config_path, "contour")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def group(config_path):
    """Group the seed points into closed curves."""
    try:
        _run_app(config_path, "group")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def tubular(config_path):
    """Extract tubular centerlines from the first seed to the rest."""
    try:
        _run_app(config_path, "tubular")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command()
@click.option("--lambdas", default="1,10,100,1000", show_default=True)
@click.option("--grid", "grid_spec", default="32x32x36", show_default=True)
@click.option("--alpha", default=500.0, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def bench(lambdas, grid_spec, alpha, out_path):
    """Mean local-update counts of the fast march across penalizations."""
    try:
        lams = [float(x) for x in lambdas.split(",")]
        w, h, k = (int(x) for x in grid_spec.lower().split("x"))
        grid = GridSpec3(GridSpec2(w, h), k)
        means = update_count_trend(lams, grid=grid, alpha=alpha, strict=False)
        doc = {
            "grid": [w, h, k],
            "alpha": alpha,
            "mean_updates": [{"lambda": l, "mean": means[float(l)]} for l in lams],
            "nondecreasing": all(
                means[float(a)] <= means[float(b)] + 1e-12
                for a, b in zip(lams, lams[1:])
            ),
        }
        if out_path:
            write_json(out_path, doc)
        click.echo(canonical_json(doc), nl=False)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


if __name__ == "__main__":
    main()
