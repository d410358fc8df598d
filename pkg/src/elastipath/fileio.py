"""File formats and rendering: images, raw volumes, canonical JSON, overlays.

Disk images are (H, W) row-major; in memory everything uses the package's
field layout (W, H).  Volumes are stored as little-endian float64 C-order
raw bytes next to a JSON sidecar header.  All structured output goes
through ``canonical_json`` (sorted keys, floats at 17 significant digits)
so repeated runs and the HTTP service produce byte-identical documents.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage, ImageDraw

from .errors import ElastipathError
from .features import Image
from .grid import GridSpec2, GridSpec3

VOLUME_DTYPE = "<f8"

PATH_PALETTE = [
    (230, 57, 70), (29, 53, 87), (42, 157, 143), (233, 196, 106),
    (244, 162, 97), (38, 70, 83), (144, 190, 109), (249, 132, 74),
]
SEED_COLOR = (66, 135, 245)
ARROW_LEN = 12.0


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ElastipathError("non-finite number in JSON output")
    if x == int(x) and abs(x) < 1e16:
        return f"{int(x)}.0"
    return format(x, ".17g")


def _canon(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        inner = ",".join(f"{json.dumps(str(k))}:{_canon(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        return "[" + ",".join(_canon(v) for v in seq) + "]"
    raise ElastipathError(f"cannot serialize {type(obj)!r}")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, 17-significant-digit floats."""
    return _canon(obj) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(obj))


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------

def read_image(path) -> Image:
    """Load 8/16-bit grayscale or 8-bit RGB (PNG, PNM) into [0, 1] fields."""
    with PILImage.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64)
            peak = 65535.0 if im.mode.startswith("I;16") else max(arr.max(), 1.0)
            data = arr / peak
        elif im.mode == "L":
            data = np.asarray(im, dtype=np.float64) / 255.0
        elif im.mode in ("RGB", "RGBA"):
            rgb = im.convert("RGB")
            data = np.asarray(rgb, dtype=np.float64) / 255.0
        elif im.mode == "P":
            data = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        elif im.mode == "1":
            data = np.asarray(im, dtype=np.float64)
        else:
            raise ElastipathError(f"unsupported image mode {im.mode!r}")
    if data.ndim == 2:
        return Image(data.T)
    return Image(np.transpose(data, (1, 0, 2)))


def write_image(path, img: Image | np.ndarray) -> None:
    data = img.data if isinstance(img, Image) else np.asarray(img, dtype=float)
    arr = np.clip(data, 0.0, 1.0)
    if arr.ndim == 2:
        out = (arr.T * 255).astype(np.uint8)
    else:
        out = (np.transpose(arr, (1, 0, 2)) * 255).astype(np.uint8)
    PILImage.fromarray(out).save(path)


# ---------------------------------------------------------------------------
# Raw volumes
# ---------------------------------------------------------------------------

def volume_paths(base) -> tuple[str, str]:
    base = str(base)
    if base.endswith(".raw") or base.endswith(".json"):
        base = base.rsplit(".", 1)[0]
    return base + ".raw", base + ".json"


def write_volume(base, values: np.ndarray, grid) -> None:
    """Little-endian float64 raw volume plus a JSON sidecar header."""
    raw_path, hdr_path = volume_paths(base)
    values = np.ascontiguousarray(values, dtype=np.float64)
    lifted = isinstance(grid, GridSpec3)
    header = {
        "dims": list(values.shape),
        "spacing": float(grid.spacing),
        "n_theta": int(grid.n_theta) if lifted else None,
        "dtype": VOLUME_DTYPE,
        "order": "C",
        "byte_order": "little",
        "axes": "x y theta" if lifted else "x y",
    }
    with open(raw_path, "wb") as fh:
        fh.write(values.astype(VOLUME_DTYPE).tobytes(order="C"))
    write_json(hdr_path, header)


def read_volume(base) -> tuple[np.ndarray, dict]:
    raw_path, hdr_path = volume_paths(base)
    header = read_json(hdr_path)
    data = np.fromfile(raw_path, dtype=VOLUME_DTYPE)
    values = data.reshape(header["dims"])
    return values, header


# ---------------------------------------------------------------------------
# Seeds and paths
# ---------------------------------------------------------------------------

def read_seeds(path) -> dict:
    doc = read_json(path)
    if "points" not in doc or not isinstance(doc["points"], list):
        raise ElastipathError("seed file needs a 'points' list")
    for p in doc["points"]:
        if "x" not in p or "y" not in p:
            raise ElastipathError("each seed needs x and y")
    doc.setdefault("params", {})
    return doc


def seeds_document(points, params=None) -> dict:
    out = []
    for p in points:
        entry = {"x": float(p[0]), "y": float(p[1])}
        theta = p[2] if len(p) > 2 else None
        entry["theta"] = None if theta is None else float(theta)
        out.append(entry)
    return {"points": out, "params": params or {}}


def path_document(path, energy: float, meta=None) -> dict:
    return {
        "points": [[p.x, p.y, p.theta] for p in path.points],
        "energy": float(energy),
        "meta": meta or {},
    }


def write_paths_csv(path, lifted_path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,theta\n")
        for p in lifted_path.points:
            fh.write(f"{_fmt_float(p.x)},{_fmt_float(p.y)},{_fmt_float(p.theta)}\n")


# ---------------------------------------------------------------------------
# Overlay rendering
# ---------------------------------------------------------------------------

def render_overlay(img: Image, paths, seeds=(), out_path=None) -> PILImage.Image:
    """Paths and seed glyphs (dot plus tangent arrow) over the image.

    ``paths`` is a sequence of point arrays [[x, y, ...], ...]; drawing is
    clipped by the canvas, out-of-bounds vertices are safe.
    """
    base = np.clip(img.gray(), 0.0, 1.0)
    canvas = PILImage.fromarray((base.T * 255).astype(np.uint8)).convert("RGB")
    draw = ImageDraw.Draw(canvas)
    for n, path in enumerate(paths):
        pts = [(float(p[0]), float(p[1])) for p in np.asarray(path)]
        if len(pts) >= 2:
            draw.line(pts, fill=PATH_PALETTE[n % len(PATH_PALETTE)], width=1)
    for s in seeds:
        x, y = float(s[0]), float(s[1])
        draw.ellipse([x - 2, y - 2, x + 2, y + 2], fill=SEED_COLOR)
        theta = s[2] if len(s) > 2 and s[2] is not None else None
        if theta is not None:
            tip = (x + ARROW_LEN * math.cos(theta), y + ARROW_LEN * math.sin(theta))
            draw.line([(x, y), tip], fill=SEED_COLOR, width=1)
            for side in (2.5, -2.5):
                ang = theta + math.pi + side * 0.2
                back = (tip[0] + 4 * math.cos(ang), tip[1] + 4 * math.sin(ang))
                draw.line([tip, back], fill=SEED_COLOR, width=1)
    if out_path is not None:
        canvas.save(out_path)
    return canvas


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "grid": {"n_theta": 72, "spacing": 1.0},
    "metric": {"kind": "data_driven_finsler_elastica", "lambda": 100.0,
               "alpha": 500.0, "rho": None, "beta1": 1.0, "beta2": None,
               "tau": None, "w": 1.0},
    "features": {"kind": "edge", "sigma": 2.0, "order": 5,
                 "radii": list(range(1, 9)), "eta": 10.0, "p": 2.0},
    "stencil": {"mode": "anisotropy_adaptive", "radius_cap": 13},
    "application": {"mode": "contour", "seeds": None, "n_max": 3},
    "output": {"dir": "out"},
}


@dataclass
class RunConfig:
    """Validated batch-run configuration (see DEFAULT_CONFIG for shape)."""

    image: str | None = None
    grid: dict = field(default_factory=dict)
    metric: dict = field(default_factory=dict)
    features: dict = field(default_factory=dict)
    stencil: dict = field(default_factory=dict)
    application: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunConfig":
        doc = read_json(path)
        return cls.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = ".") -> "RunConfig":
        cfg = cls()
        cfg.image = doc.get("image")
        for section in ("grid", "metric", "features", "stencil", "application", "output"):
            merged = dict(DEFAULT_CONFIG[section])
            merged.update(doc.get(section, {}))
            setattr(cfg, section, merged)
        for key in ("image",):
            val = getattr(cfg, key)
            if val is not None and not os.path.isabs(val):
                setattr(cfg, key, os.path.join(base_dir, val))
        seeds = cfg.application.get("seeds")
        if seeds is not None and not os.path.isabs(seeds):
            cfg.application["seeds"] = os.path.join(base_dir, seeds)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.image is not None and not os.path.exists(self.image):
            raise ElastipathError(f"image file not found: {self.image}")
        seeds = self.application.get("seeds")
        if seeds is not None and not os.path.exists(seeds):
            raise ElastipathError(f"seed file not found: {seeds}")
        if self.grid["n_theta"] < 4:
            raise ElastipathError("grid.n_theta must be >= 4")
        if self.metric["lambda"] < 1.0:
            raise ElastipathError("metric.lambda must be >= 1")
        if self.metric["alpha"] <= 0.0:
            raise ElastipathError("metric.alpha must be > 0")
