"""Shared orchestration between the CLI and the HTTP service.

Both front ends feed a validated RunConfig and a seed document through the
same functions here, so their result documents are byte-identical for
identical inputs (everything is serialized with canonical_json).
"""

from __future__ import annotations

import numpy as np

from .apps import (
    BoundaryFeatures,
    OrientedSeedSet,
    SeedSpec,
    TubularFeatures,
    boundary_metric,
    detect_closed_contour,
    extract_tubular,
    perceptual_grouping,
    tubular_metric,
)
from .errors import ElastipathError, SeedError
from .features import Image
from .fileio import RunConfig, path_document
from .grid import GridSpec2, GridSpec3, LiftedPoint
from .metrics import (
    DataDrivenElasticaMetric,
    ElasticaParams,
    FinslerElasticaMetric,
    IsotropicMetric2D,
    OrientationLiftedIsotropicMetric,
)
from .stencils import StencilPolicy


def stencil_policy(cfg: RunConfig) -> StencilPolicy:
    return StencilPolicy(mode=cfg.stencil["mode"], radius_cap=int(cfg.stencil["radius_cap"]))


def elastica_params(cfg: RunConfig) -> ElasticaParams:
    return ElasticaParams(float(cfg.metric["lambda"]), float(cfg.metric["alpha"]))


def build_features(cfg: RunConfig, img: Image):
    """Feature bundle (metric included) for the configured application."""
    kind = cfg.features["kind"]
    n_theta = int(cfg.grid["n_theta"])
    params = elastica_params(cfg)
    if kind == "edge":
        return boundary_metric(
            img, params, sigma=float(cfg.features["sigma"]),
            order=int(cfg.features["order"]), eta=float(cfg.features["eta"]),
            p=float(cfg.features["p"]), n_theta=n_theta,
        )
    if kind == "flux":
        return tubular_metric(
            img, params, sigma=float(cfg.features["sigma"]),
            radii=tuple(int(r) for r in cfg.features["radii"]),
            eta=float(cfg.features["eta"]), p=float(cfg.features["p"]),
            n_theta=n_theta,
        )
    raise ElastipathError(f"unknown feature kind {kind!r}")


def build_metric(cfg: RunConfig, img: Image | None):
    """Solver metric for the `solve`/`trace` commands."""
    kind = cfg.metric["kind"]
    params = elastica_params(cfg)
    n_theta = int(cfg.grid["n_theta"])
    spacing = float(cfg.grid["spacing"])
    if kind == "finsler_elastica":
        if img is not None:
            grid = GridSpec3(GridSpec2(img.grid.width, img.grid.height, spacing), n_theta)
        else:
            w = int(cfg.grid.get("width", 64))
            h = int(cfg.grid.get("height", 64))
            grid = GridSpec3(GridSpec2(w, h, spacing), n_theta)
        return FinslerElasticaMetric(params, grid)
    if kind == "data_driven_finsler_elastica":
        if img is None:
            raise ElastipathError("data-driven metric needs an image")
        return build_features(cfg, img).metric
    if kind == "isotropic":
        if img is None:
            raise ElastipathError("isotropic metric needs an image")
        from .features import color_structure_tensor, ir_baseline
        _, phi2, _, _ = color_structure_tensor(img, float(cfg.features["sigma"]))
        beta2 = cfg.metric["beta2"]
        beta2 = 2.0 * float(cfg.features["eta"]) if beta2 is None else float(beta2)
        return ir_baseline(img.grid, phi2, beta1=float(cfg.metric["beta1"]),
                           beta2=beta2, p=float(cfg.features["p"]))
    if kind == "anisotropic":
        if img is None:
            raise ElastipathError("anisotropic metric needs an image")
        from .features import ar_baseline, color_structure_tensor
        phi1, phi2, g1, g2 = color_structure_tensor(img, float(cfg.features["sigma"]))
        tau = cfg.metric["tau"]
        return ar_baseline(img.grid, phi1, phi2, g1, g2,
                           tau=None if tau is None else float(tau))
    if kind == "isotropic_lifted":
        if img is None:
            raise ElastipathError("lifted isotropic metric needs an image")
        feats = build_features(cfg, img)
        rho = cfg.metric["rho"]
        rho = float(cfg.metric["alpha"]) if rho is None else float(rho)
        return OrientationLiftedIsotropicMetric(feats.grid, feats.speed.phi, rho)
    raise ElastipathError(f"unknown metric kind {kind!r}")


def seed_specs(seed_doc: dict) -> list[SeedSpec]:
    return [SeedSpec(float(p["x"]), float(p["y"]),
                     None if p.get("theta") is None else float(p["theta"]))
            for p in seed_doc["points"]]


def run_application(cfg: RunConfig, img: Image, seed_doc: dict) -> dict:
    """Run the configured application, returning the result document."""
    mode = cfg.application["mode"]
    specs = seed_specs(seed_doc)
    policy = stencil_policy(cfg)
    if mode in ("contour", "group"):
        feats = build_features(cfg, img)
        if any(s.theta is None for s in specs):
            raise SeedError("contour and grouping seeds need orientations")
        seeds = OrientedSeedSet.from_seeds(specs, feats.grid)
        if mode == "contour":
            res = detect_closed_contour(seeds, feats.metric, policy=policy)
            return contour_document(res)
        n_max = int(cfg.application.get("n_max") or 0)
        res = perceptual_grouping(seeds, n_max, feats.metric, policy=policy)
        return grouping_document(res)
    if mode == "tubular":
        if len(specs) < 2:
            raise SeedError("tubular extraction needs a source and at least one end")
        flux_cfg = dict(cfg.features)
        flux_cfg["kind"] = "flux"
        cfg2 = RunConfig(image=cfg.image, grid=cfg.grid, metric=cfg.metric,
                         features=flux_cfg, stencil=cfg.stencil,
                         application=cfg.application, output=cfg.output)
        feats = build_features(cfg2, img)
        manual = {}
        if specs[0].theta is not None:
            manual["source"] = specs[0].theta
        for n, s in enumerate(specs[1:]):
            if s.theta is not None:
                manual[n] = s.theta
        res = extract_tubular((specs[0].x, specs[0].y),
                              [(s.x, s.y) for s in specs[1:]],
                              feats, manual_thetas=manual, policy=policy)
        return tubular_document(res)
    raise ElastipathError(f"unknown application mode {mode!r}")


# ---------------------------------------------------------------------------
# Result documents
# ---------------------------------------------------------------------------

def _segment_entry(pair, path, energy) -> dict:
    frm, to = pair
    return {
        "from": [frm.x, frm.y, frm.theta],
        "to": [to.x, to.y, to.theta],
        "points": [[p.x, p.y, p.theta] for p in path.points],
        "energy": float(energy),
    }


def contour_document(res) -> dict:
    return {
        "mode": "contour",
        "closed": bool(res.closed),
        "vertex_order": [[int(i), int(s)] for i, s in res.vertex_order],
        "segments": [_segment_entry(pair, path, e)
                     for pair, path, e in zip(res.chi, res.segments, res.energies)],
        "solve_count": int(res.solve_count),
    }


def grouping_document(res) -> dict:
    groups = []
    for g in res.groups:
        groups.append({
            "closed": bool(g.closed),
            "vertex_order": [[int(i), int(s)] for i, s in g.vertex_order],
            "segments": [_segment_entry(pair, path, e)
                         for pair, path, e in zip(g.chi, g.segments, g.energies)],
        })
    return {"mode": "group", "groups": groups, "solve_count": int(res.solve_count)}


def tubular_document(res) -> dict:
    lines = []
    for path, chosen, energy, err in zip(res.centerlines, res.chosen_lifts,
                                         res.energies, res.errors):
        if path is None:
            lines.append({"error": err, "path": None, "chosen": None,
                          "energy": None})
        else:
            lines.append({
                "error": None,
                "chosen": [int(chosen[0]), int(chosen[1])],
                "energy": float(energy),
                "path": path_document(path, energy),
            })
    s0, s1 = res.source_lifts
    return {
        "mode": "tubular",
        "source_lifts": [[s0.x, s0.y, s0.theta], [s1.x, s1.y, s1.theta]],
        "centerlines": lines,
        "solve_count": int(res.solve_count),
    }


def document_paths(doc: dict) -> list:
    """Point arrays of every path in a result document (for overlays)."""
    out = []
    if doc["mode"] in ("contour",):
        for seg in doc["segments"]:
            out.append(np.asarray(seg["points"]))
    elif doc["mode"] == "group":
        for g in doc["groups"]:
            for seg in g["segments"]:
                out.append(np.asarray(seg["points"]))
    elif doc["mode"] == "tubular":
        for line in doc["centerlines"]:
            if line["path"] is not None:
                out.append(np.asarray(line["path"]["points"]))
    return out
