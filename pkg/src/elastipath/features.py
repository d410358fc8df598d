"""Orientation-dependent image measurements and the speed fields they drive.

Everything here uses the field layout ``arr[i, j]`` with ``i`` the x column
and ``j`` the y row (images from disk are transposed into this layout by
``fileio``).  Pixel intensities live in [0, 1].

Two response banks are provided: an odd-order steerable derivative-of-
Gaussian edge detector (responses peak when the probe angle crosses the
edge, i.e. along the edge normal) and the oriented-flux tubularity measure
(gradient flux through a circle, maximal across a dark tube).  Speed
fields shift either response by a quarter turn so propagation is fast when
the path direction runs along the feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d, gaussian_filter
from scipy.signal import fftconvolve

from .errors import ElastipathError
from .grid import GridSpec2, GridSpec3
from .metrics import AnisotropicMetric2D, IsotropicMetric2D

DEFAULT_ORDER = 5
DEFAULT_RADII = tuple(range(1, 9))


@dataclass
class Image:
    """Intensity field in [0, 1]; ``data`` is (W, H) or (W, H, 3)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim not in (2, 3) or (d.ndim == 3 and d.shape[2] != 3):
            raise ElastipathError("image must be (W, H) gray or (W, H, 3) color")
        if not np.all(np.isfinite(d)):
            raise ElastipathError("image contains non-finite values")
        self.data = d

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def grid(self) -> GridSpec2:
        return GridSpec2(self.data.shape[0], self.data.shape[1])

    def gray(self) -> np.ndarray:
        if self.channels == 1:
            return self.data
        return self.data.mean(axis=2)


@dataclass
class OrientedResponse:
    """Nonnegative response sampled per (pixel, orientation slot)."""

    samples: np.ndarray          # (W, H, K)
    kind: str                    # "edge" or "flux"

    @property
    def n_theta(self) -> int:
        return self.samples.shape[2]


@dataclass
class SpeedField:
    """Propagation speed 1 <= phi <= 1 + eta on the lifted grid."""

    phi: np.ndarray
    eta: float
    p: float

    def __post_init__(self):
        if not (np.all(self.phi >= 1.0 - 1e-12) and np.all(self.phi <= 1.0 + self.eta + 1e-9)):
            raise ElastipathError("speed must lie in [1, 1 + eta]")


@dataclass
class OrientedFluxResult:
    tensors: dict            # radius -> (W, H, 3) components (q11, q12, q22)
    response: OrientedResponse
    vesselness: np.ndarray   # (W, H)
    optimal_radius: np.ndarray


# ---------------------------------------------------------------------------
# Steerable edge detector
# ---------------------------------------------------------------------------

def gaussian_derivative_1d(order: int, sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian derivative kernel truncated at 4 sigma."""
    radius = max(1, int(math.ceil(4.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=float)
    g = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    if order == 0:
        return g
    # Hermite-style recursion: g^(n) = (-1)^n h_n g with
    # h_n = (x/s^2) h_(n-1) - ((n-1)/s^2) h_(n-2)
    hs = [np.ones_like(x), x / sigma**2]
    for n in range(2, order + 1):
        hs.append((x / sigma**2) * hs[n - 1] - ((n - 1) / sigma**2) * hs[n - 2])
    return (-1) ** order * hs[order] * g


def steer_orders(order: int) -> list[int]:
    if order not in (1, 3, 5):
        raise ElastipathError("steerable order must be 1, 3 or 5")
    return [t for t in (1, 3, 5) if t <= order]


def steer_weights(order: int, sigma: float) -> dict[int, float]:
    """Order weights of the edge template (constructive-sign at a step edge,
    magnitudes scale-normalized by sigma powers)."""
    table = {1: 1.0, 3: -1.0 / 3.0, 5: 1.0 / 15.0}
    return {t: table[t] * sigma ** (t - 1) for t in steer_orders(order)}


def steer_coefficients(order: int, sigma: float, theta: float) -> dict[tuple[int, int], float]:
    """Coefficients K_(tau, xi)(theta) of the basis kernels d^(tau-xi)_x d^xi_y G."""
    weights = steer_weights(order, sigma)
    out = {}
    c, s = math.cos(theta), math.sin(theta)
    for tau, w in weights.items():
        for xi in range(tau + 1):
            out[(tau, xi)] = w * math.comb(tau, xi) * (c ** (tau - xi)) * (s ** xi)
    return out


def _basis_responses(channel: np.ndarray, sigma: float, order: int) -> dict:
    out = {}
    for tau in steer_orders(order):
        for xi in range(tau + 1):
            kx = gaussian_derivative_1d(tau - xi, sigma)
            ky = gaussian_derivative_1d(xi, sigma)
            resp = convolve1d(channel, kx, axis=0, mode="nearest")
            resp = convolve1d(resp, ky, axis=1, mode="nearest")
            out[(tau, xi)] = resp
    return out


def steerable_kernel(order: int, sigma: float, theta: float) -> np.ndarray:
    """Explicit 2-D rotated kernel (reference path for the steering identity)."""
    coeffs = steer_coefficients(order, sigma, theta)
    radius = max(1, int(math.ceil(4.0 * sigma)))
    size = 2 * radius + 1
    kern = np.zeros((size, size))
    for (tau, xi), k in coeffs.items():
        kx = gaussian_derivative_1d(tau - xi, sigma)
        ky = gaussian_derivative_1d(xi, sigma)
        kern += k * np.outer(kx, ky)
    return kern


def steerable_edge_response(img: Image, sigma: float, order: int = DEFAULT_ORDER,
                            n_theta: int = 72) -> OrientedResponse:
    """Multi-orientation edge response |I * F_theta| at all orientation slots.

    One bank of separable basis convolutions is recombined per angle with
    trigonometric coefficients; color images average the per-channel
    absolute responses.  The response is pi-symmetric (odd orders only).
    """
    if sigma <= 0:
        raise ElastipathError("sigma must be positive")
    W, H = img.data.shape[:2]
    channels = [img.data] if img.channels == 1 else [img.data[:, :, c] for c in range(3)]
    banks = [_basis_responses(ch, sigma, order) for ch in channels]
    out = np.zeros((W, H, n_theta))
    for k in range(n_theta):
        theta = 2 * math.pi * k / n_theta
        coeffs = steer_coefficients(order, sigma, theta)
        acc = np.zeros((W, H))
        for bank in banks:
            resp = np.zeros((W, H))
            for key, c in coeffs.items():
                if c != 0.0:
                    resp += c * bank[key]
            acc += np.abs(resp)
        out[:, :, k] = acc / len(banks)
    return OrientedResponse(samples=out, kind="edge")


# ---------------------------------------------------------------------------
# Oriented flux
# ---------------------------------------------------------------------------

def disk_indicator(radius: float) -> np.ndarray:
    """Circle indicator rasterized by exact pixel-center membership."""
    r = int(math.floor(radius))
    ii, jj = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    return (ii * ii + jj * jj <= radius * radius).astype(float)


def oriented_flux(img: Image, sigma: float, radii=DEFAULT_RADII,
                  n_theta: int = 72) -> OrientedFluxResult:
    """Oriented-flux tensors, multi-orientation response, vesselness, scale.

    Q(x, r) is the Gaussian Hessian of the image convolved with the radius-r
    disk; its leading eigenvalue over the scale-normalized sweep gives the
    vesselness and the optimal radius, and the response is the (clamped)
    quadratic form along each probe orientation at the optimal radius.
    """
    if not radii:
        raise ElastipathError("radii must be nonempty")
    I = img.gray()
    W, H = I.shape
    hxx = gaussian_filter(I, sigma, order=(2, 0), mode="nearest")
    hxy = gaussian_filter(I, sigma, order=(1, 1), mode="nearest")
    hyy = gaussian_filter(I, sigma, order=(0, 2), mode="nearest")

    tensors = {}
    lam1_over_r = np.full((len(radii), W, H), -np.inf)
    for n, r in enumerate(radii):
        disk = disk_indicator(r)
        q11 = fftconvolve(hxx, disk, mode="same")
        q12 = fftconvolve(hxy, disk, mode="same")
        q22 = fftconvolve(hyy, disk, mode="same")
        tensors[r] = np.stack([q11, q12, q22], axis=-1)
        half_tr = 0.5 * (q11 + q22)
        rad = np.sqrt((0.5 * (q11 - q22)) ** 2 + q12 * q12)
        lam1_over_r[n] = (half_tr + rad) / r

    best = np.argmax(lam1_over_r, axis=0)
    radii_arr = np.asarray(radii, dtype=float)
    r_star = radii_arr[best]
    vesselness = np.maximum(np.max(lam1_over_r, axis=0), 0.0)

    # gather tensor components at the optimal radius per pixel
    stacked = np.stack([tensors[r] for r in radii], axis=0)  # (R, W, H, 3)
    ii, jj = np.meshgrid(np.arange(W), np.arange(H), indexing="ij")
    q_opt = stacked[best, ii, jj]                            # (W, H, 3)

    thetas = 2 * math.pi * np.arange(n_theta) / n_theta
    cos2 = np.cos(thetas) ** 2
    sincos = np.sin(thetas) * np.cos(thetas)
    sin2 = np.sin(thetas) ** 2
    g = (
        q_opt[:, :, 0, None] * cos2[None, None, :]
        + 2.0 * q_opt[:, :, 1, None] * sincos[None, None, :]
        + q_opt[:, :, 2, None] * sin2[None, None, :]
    )
    g = np.maximum(g, 0.0)
    return OrientedFluxResult(
        tensors=tensors,
        response=OrientedResponse(samples=g, kind="flux"),
        vesselness=vesselness,
        optimal_radius=r_star,
    )


# ---------------------------------------------------------------------------
# Speed functions and orientation map
# ---------------------------------------------------------------------------

def _quarter_turn(samples: np.ndarray) -> np.ndarray:
    """Response sampled at theta + pi/2, circularly interpolated if needed."""
    K = samples.shape[2]
    if K % 4 == 0:
        return np.roll(samples, -K // 4, axis=2)
    shift = K / 4.0
    lo = int(math.floor(shift))
    frac = shift - lo
    return (1 - frac) * np.roll(samples, -lo, axis=2) + frac * np.roll(samples, -(lo + 1), axis=2)


def speed_function(resp: OrientedResponse, eta: float, p: float = 2.0) -> SpeedField:
    """Speed phi(x, theta) = 1 + eta * (resp(x, theta + pi/2)/max resp)^p.

    The quarter-turn shift makes propagation fast when the path direction
    is tangent to the feature (responses peak across it).  An identically
    zero response yields unit speed everywhere.
    """
    if eta <= 0 or p <= 0:
        raise ElastipathError("eta and p must be positive")
    peak = float(resp.samples.max())
    if peak <= 0.0:
        return SpeedField(phi=np.ones_like(resp.samples), eta=eta, p=p)
    shifted = _quarter_turn(resp.samples)
    phi = 1.0 + eta * np.power(shifted / peak, p)
    return SpeedField(phi=phi, eta=eta, p=p)


def optimal_orientation(resp: OrientedResponse) -> np.ndarray:
    """Per-pixel angle in [0, pi) minimizing the symmetrized response.

    Ties resolve to the smallest orientation index.  Used to auto-lift
    physical seed points for tubular extraction.
    """
    K = resp.n_theta
    if K % 2 != 0:
        raise ElastipathError("optimal orientation needs an even orientation count")
    half = K // 2
    sym = 0.5 * (resp.samples[:, :, :half] + resp.samples[:, :, half:])
    kmin = np.argmin(sym, axis=2)
    return kmin * (2 * math.pi / K)


# ---------------------------------------------------------------------------
# Structure tensor and planar baselines
# ---------------------------------------------------------------------------

def color_structure_tensor(img: Image, sigma: float):
    """Eigen-decomposed smoothed gradient outer-product tensor.

    Returns (phi1, phi2, g1, g2) with phi1 <= phi2 pointwise; phi2 is the
    (color) gradient magnitude energy and g2 the unit gradient direction.
    """
    if sigma <= 0:
        raise ElastipathError("sigma must be positive")
    channels = [img.data] if img.channels == 1 else [img.data[:, :, c] for c in range(3)]
    e11 = e12 = e22 = 0.0
    for ch in channels:
        ix = gaussian_filter(ch, sigma, order=(1, 0), mode="nearest")
        iy = gaussian_filter(ch, sigma, order=(0, 1), mode="nearest")
        e11 = e11 + ix * ix
        e12 = e12 + ix * iy
        e22 = e22 + iy * iy
    half_tr = 0.5 * (e11 + e22)
    rad = np.sqrt((0.5 * (e11 - e22)) ** 2 + e12 * e12)
    phi2 = half_tr + rad
    phi1 = np.maximum(half_tr - rad, 0.0)
    # eigenvector of the larger eigenvalue (gradient direction)
    vx = np.where(np.abs(e12) > 1e-30, phi2 - e22, np.where(e11 >= e22, 1.0, 0.0))
    vy = np.where(np.abs(e12) > 1e-30, e12, np.where(e11 >= e22, 0.0, 1.0))
    norm = np.hypot(vx, vy)
    norm = np.where(norm > 0, norm, 1.0)
    g2 = np.stack([vx / norm, vy / norm], axis=-1)
    g1 = np.stack([-g2[:, :, 1], g2[:, :, 0]], axis=-1)
    return phi1, phi2, g1, g2


def ir_baseline(grid: GridSpec2, saliency: np.ndarray, beta1: float = 1.0,
                beta2: float = 20.0, p: float = 2.0) -> IsotropicMetric2D:
    """Isotropic planar metric 1/(beta1 + beta2 * s^p); pass the structure
    tensor's phi2 for boundaries or the vesselness map for tubular runs."""
    s = np.asarray(saliency, dtype=float)
    peak = s.max()
    if peak > 0:
        s = s / peak
    return IsotropicMetric2D.from_saliency(grid, s, beta1=beta1, beta2=beta2, p=p)


def ar_baseline(grid: GridSpec2, phi1: np.ndarray, phi2: np.ndarray,
                g1: np.ndarray, g2: np.ndarray, tau: float | None = None,
                eigenvalue_ratio: float = 20.0) -> AnisotropicMetric2D:
    """Anisotropic planar metric exp(tau phi2) g1 g1^T + exp(tau phi1) g2 g2^T.

    With ``tau`` omitted it is scaled (negative) so the worst per-node
    eigenvalue ratio equals ``eigenvalue_ratio``.
    """
    if tau is None:
        gap = float(np.max(phi2 - phi1))
        tau = 0.0 if gap <= 0 else -math.log(eigenvalue_ratio) / gap
    if tau > 0:
        raise ElastipathError("tau must be nonpositive")
    w1 = np.exp(tau * phi2)
    w2 = np.exp(tau * phi1)
    tensors = (
        w1[:, :, None, None] * (g1[:, :, :, None] * g1[:, :, None, :])
        + w2[:, :, None, None] * (g2[:, :, :, None] * g2[:, :, None, :])
    )
    return AnisotropicMetric2D(grid, tensors)


def lifted_grid_for(img: Image, n_theta: int = 72) -> GridSpec3:
    return GridSpec3(img.grid, n_theta)
