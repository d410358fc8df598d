"""Synthetic images and ground-truth helpers for application tests."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import gaussian_filter

from elastipath.features import Image


def _soft_mask(signed_dist: np.ndarray, softness: float = 1.0) -> np.ndarray:
    """0 inside (negative distance) to 1 outside, smoothly over ~softness px."""
    return 1.0 / (1.0 + np.exp(-signed_dist / softness))


def ellipse_image(w: int, h: int, a: float, b: float, center=None,
                  softness: float = 1.5) -> Image:
    """Dark filled ellipse (semi-axes a, b) on a bright background."""
    if center is None:
        center = (w / 2, h / 2)
    xx, yy = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float),
                         indexing="ij")
    # pseudo signed distance: scaled implicit function
    q = np.sqrt(((xx - center[0]) / a) ** 2 + ((yy - center[1]) / b) ** 2)
    signed = (q - 1.0) * min(a, b)
    return Image(_soft_mask(signed, softness))


def ellipse_image_with_gap(w: int, h: int, a: float, b: float, center=None,
                           gap_center: float = 1.25 * math.pi,
                           gap_half: float = 0.35, contrast: float = 0.15,
                           softness: float = 1.5) -> Image:
    """Dark ellipse whose boundary contrast fades along one arc.

    The fill contrast drops to ``contrast`` inside the angular window, so
    the edge response weakens there while the true boundary stays put —
    the regime where low curvature penalties take chord shortcuts.
    """
    if center is None:
        center = (w / 2, h / 2)
    xx, yy = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float),
                         indexing="ij")
    q = np.sqrt(((xx - center[0]) / a) ** 2 + ((yy - center[1]) / b) ** 2)
    signed = (q - 1.0) * min(a, b)
    dark = 1.0 - _soft_mask(signed, softness)
    ang = np.arctan2((yy - center[1]) / b, (xx - center[0]) / a) % (2 * math.pi)
    d_ang = np.abs((ang - gap_center + math.pi) % (2 * math.pi) - math.pi)
    weight = np.where(d_ang <= gap_half, contrast, 1.0)
    return Image(1.0 - dark * weight)


def ellipse_boundary(a: float, b: float, center, n: int = 4096) -> np.ndarray:
    t = np.linspace(0, 2 * math.pi, n, endpoint=False)
    return np.stack([center[0] + a * np.cos(t), center[1] + b * np.sin(t)], axis=1)


def ellipse_seed(a: float, b: float, center, t: float, ccw: bool = True):
    """Boundary point and tangent angle at ellipse parameter t."""
    x = center[0] + a * math.cos(t)
    y = center[1] + b * math.sin(t)
    tx, ty = -a * math.sin(t), b * math.cos(t)
    if not ccw:
        tx, ty = -tx, -ty
    return x, y, math.atan2(ty, tx)


def circle_image(w: int, h: int, centers, radius: float,
                 softness: float = 1.5) -> Image:
    """One or more dark filled circles on a bright background."""
    xx, yy = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float),
                         indexing="ij")
    signed = np.full((w, h), np.inf)
    for c in centers:
        d = np.hypot(xx - c[0], yy - c[1]) - radius
        signed = np.minimum(signed, d)
    return Image(_soft_mask(signed, softness))


def circle_seed(center, radius: float, ang: float, ccw: bool = True):
    x = center[0] + radius * math.cos(ang)
    y = center[1] + radius * math.sin(ang)
    th = ang + (math.pi / 2 if ccw else -math.pi / 2)
    return x, y, th


def tube_image(w: int, h: int, centerline: np.ndarray, half_width: float,
               softness: float = 1.0) -> Image:
    """Dark tube of the given half width around a polyline centerline."""
    xx, yy = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float),
                         indexing="ij")
    d = np.full((w, h), np.inf)
    seg = centerline
    for p, q in zip(seg[:-1], seg[1:]):
        pq = q - p
        L2 = float(pq @ pq)
        t = np.clip(((xx - p[0]) * pq[0] + (yy - p[1]) * pq[1]) / max(L2, 1e-12), 0, 1)
        dx = xx - (p[0] + t * pq[0])
        dy = yy - (p[1] + t * pq[1])
        d = np.minimum(d, np.hypot(dx, dy))
    return Image(_soft_mask(d - half_width, softness))


def s_curve_centerline(w: int, h: int, n: int = 300, amp_frac: float = 0.125) -> np.ndarray:
    """Gentle S from left to right through the image center.

    The default amplitude keeps the bend radius well above the flux disk
    radii, where the tubularity ridge tracks the true centerline."""
    x = np.linspace(0.12 * w, 0.88 * w, n)
    amp = amp_frac * h
    y = h / 2 + amp * np.sin(2 * math.pi * (x - x[0]) / (x[-1] - x[0]))
    return np.stack([x, y], axis=1)


def straight_centerline(w: int, h: int, n: int = 100) -> np.ndarray:
    x = np.linspace(0.15 * w, 0.85 * w, n)
    y = np.full_like(x, h / 2)
    return np.stack([x, y], axis=1)


def mean_distance_to_curve(points: np.ndarray, curve: np.ndarray) -> float:
    d = np.linalg.norm(points[:, None, :2] - curve[None, :, :], axis=2)
    return float(d.min(axis=1).mean())


def max_distance_to_curve(points: np.ndarray, curve: np.ndarray) -> float:
    d = np.linalg.norm(points[:, None, :2] - curve[None, :, :], axis=2)
    return float(d.min(axis=1).max())
