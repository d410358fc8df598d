"""Discretization of the planar domain and its orientation-lifted extension.

The planar image domain is sampled on a regular grid with a uniform spacing;
the lifted domain adds a periodic orientation axis sampled at ``n_theta``
equally spaced angles covering [0, 2*pi).  Points carry physical coordinates
(pixels times spacing, angles in radians); indices are integer triples
(i, j, k) with the k axis wrapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomainError

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    # fmod can land exactly on 2*pi after the correction for tiny negatives
    if t >= TWO_PI:
        t -= TWO_PI
    return t


def orientation_vector(theta: float) -> np.ndarray:
    """Unit vector (cos theta, sin theta) for an orientation angle."""
    return np.array([math.cos(theta), math.sin(theta)])


@dataclass(frozen=True)
class GridSpec2:
    """Planar grid: ``width`` x ``height`` nodes, ``spacing`` length per pixel."""

    width: int
    height: int
    spacing: float = 1.0

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("grid needs at least 2 nodes per spatial axis")
        if not self.spacing > 0.0:
            raise ValueError("spacing must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def n_nodes(self) -> int:
        return self.width * self.height

    def contains_point(self, x: float, y: float) -> bool:
        return (
            -0.5 * self.spacing <= x <= (self.width - 0.5) * self.spacing
            and -0.5 * self.spacing <= y <= (self.height - 0.5) * self.spacing
        )


@dataclass(frozen=True)
class GridSpec3:
    """Orientation-lifted grid: a planar base times a periodic angle axis."""

    base: GridSpec2
    n_theta: int

    def __post_init__(self):
        if self.n_theta < 4:
            raise ValueError("n_theta must be at least 4")

    @property
    def theta_step(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def width(self) -> int:
        return self.base.width

    @property
    def height(self) -> int:
        return self.base.height

    @property
    def spacing(self) -> float:
        return self.base.spacing

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.base.width, self.base.height, self.n_theta)

    @property
    def n_nodes(self) -> int:
        return self.base.n_nodes * self.n_theta

    def wrap_k(self, k: int) -> int:
        return k % self.n_theta


@dataclass(frozen=True)
class LiftedPoint:
    """Physical position-orientation pair; theta stored reduced mod 2*pi."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class LiftedVector:
    """Tangent on the lifted domain: spatial velocity u and orientation rate nu."""

    u: tuple[float, float]
    nu: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u[0], self.u[1], self.nu])


@dataclass(frozen=True)
class LiftedIndex:
    """Integer grid index (column i, row j, orientation slot k)."""

    i: int
    j: int
    k: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.i, self.j, self.k)


def antipode(p: LiftedPoint) -> LiftedPoint:
    """Same physical position, orientation shifted by pi (mod 2*pi)."""
    return LiftedPoint(p.x, p.y, wrap_angle(p.theta + math.pi))


def validate_index(idx: LiftedIndex, spec: GridSpec3) -> None:
    if not (0 <= idx.i < spec.width and 0 <= idx.j < spec.height):
        raise OutOfDomainError(f"index {idx} outside {spec.shape}")
    if not (0 <= idx.k < spec.n_theta):
        raise OutOfDomainError(f"orientation slot {idx.k} outside [0, {spec.n_theta})")


def index_to_point(idx: LiftedIndex, spec: GridSpec3) -> LiftedPoint:
    """Physical coordinates of a grid node."""
    validate_index(idx, spec)
    h = spec.spacing
    return LiftedPoint(idx.i * h, idx.j * h, idx.k * spec.theta_step)


def point_to_nearest_index(p: LiftedPoint, spec: GridSpec3) -> LiftedIndex:
    """Nearest grid node; theta rounds periodically, spatial overflow raises."""
    h = spec.spacing
    i = int(round(p.x / h))
    j = int(round(p.y / h))
    if not (0 <= i < spec.width and 0 <= j < spec.height):
        raise OutOfDomainError(
            f"point ({p.x}, {p.y}) outside spatial bounds "
            f"{spec.width}x{spec.height} at spacing {h}"
        )
    k = int(round(wrap_angle(p.theta) / spec.theta_step)) % spec.n_theta
    return LiftedIndex(i, j, k)


def flat_index(i: int, j: int, k: int, spec: GridSpec3) -> int:
    """C-order flat node id; doubles as the deterministic heap tie-break."""
    return (i * spec.height + j) * spec.n_theta + k


def unflatten_index(flat: int, spec: GridSpec3) -> LiftedIndex:
    k = flat % spec.n_theta
    rest = flat // spec.n_theta
    return LiftedIndex(rest // spec.height, rest % spec.height, k)


def theta_of_slot(k: int, spec: GridSpec3) -> float:
    return spec.wrap_k(k) * spec.theta_step


def neighbors(idx: LiftedIndex, spec: GridSpec3):
    """Axis neighbors with periodic wrap in k; spatial off-grid ones dropped."""
    out = []
    for di, dj, dk in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
        i, j = idx.i + di, idx.j + dj
        if 0 <= i < spec.width and 0 <= j < spec.height:
            out.append(LiftedIndex(i, j, spec.wrap_k(idx.k + dk)))
    return out


def default_lifted_grid(width: int, height: int, n_theta: int = 72, spacing: float = 1.0) -> GridSpec3:
    """Lifted grid with the default angular resolution (n_theta=72, step pi/36)."""
    return GridSpec3(GridSpec2(width, height, spacing), n_theta)
